/*
 * Copyright 2026 The rfemu Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rfemu/numerics.hpp"

namespace rfemu {

// ---------------------------------------------------------------------------
// Digital RF generator
// ---------------------------------------------------------------------------

inline constexpr int kDrfgMaxPeriod = 2048;
inline constexpr double kDrfgMinDuty = 1.0 / 32.0;

/// Periodic I/Q source. The first `active_slots()` slots of every period carry
/// the programmed pattern; the rest of the period is zero.
struct DrfgConfig {
	int period = 1;
	double duty_cycle = 1.0;
	std::vector<ComplexSample> iq_pattern;

	int active_slots() const;
	/// Throws ConfigError when the period, duty cycle or pattern length is out of range.
	void validate() const;
};

ComplexSample drfg_step(const DrfgConfig& cfg, std::int64_t cycle);

// ---------------------------------------------------------------------------
// Fractional-delay correction (4-tap FIR)
// ---------------------------------------------------------------------------

/// Window order: x[n+1], x[n], x[n-1], x[n-2] (one lead sample, two lags).
using FdcWindow = std::array<ComplexSample, 4>;

struct FdcTaps {
	std::array<MiniF10, 4> taps{};

	static FdcTaps passthrough();
	/// Lagrange taps for delay `mu`, rounded to the 10-bit coefficient format.
	static FdcTaps for_delay(double mu);
	std::array<F16, 4> widened() const;
	/// Sum of the taps: the filter's gain at DC.
	double dc_gain() const;
	friend bool operator==(const FdcTaps&, const FdcTaps&) = default;
};

/// 4-point Lagrange weights for a delay of `mu` samples past x[n], mu in [0, 1).
std::array<double, 4> lagrange4(double mu);

/// Dot product of window and (widened) taps, rounded once to F16.
ComplexSample fdc_apply(const FdcWindow& window, const FdcTaps& taps);
/// Same MAC with full 16-bit coefficients; used for precision studies.
ComplexSample fdc_apply(const FdcWindow& window, const std::array<F16, 4>& taps);

// ---------------------------------------------------------------------------
// Doppler coefficient generation
// ---------------------------------------------------------------------------

/// Quarter-wave sine ROM with 1024 F16 entries, nearest-entry lookup.
class DopplerLut {
public:
	static constexpr int kQuarterEntries = 1024;
	static constexpr int kPhaseBits = 12;  // 4 * 1024 positions per turn

	DopplerLut();
	/// e^{-j 2 pi phase}, phase given as a Q0.32 fraction of a turn.
	ComplexSample coefficient(std::uint32_t phase_word) const;
	std::span<const F16> entries() const { return table_; }

private:
	F16 sine(int index) const;  // index in [0, 4096)
	std::array<F16, kQuarterEntries> table_{};
};

/// Q0.32 phase of f * t / fs, taken modulo one turn.
std::uint32_t doppler_phase_word(double freq_hz, double cycles, double sample_rate_hz);

/// Round-robin coefficient generator shared by up to four outputs. Every
/// 256 cycles all coefficients staged during the previous round commit at once.
class DopplerFsm {
public:
	static constexpr int kUpdatePeriod = 256;
	static constexpr int kGenerationCycles = 32;
	static constexpr int kMaxOutputs = 4;

	/// `phase_offset_cycles` shifts the phase reference so the coefficient
	/// matches the time at which the product leaves the pipeline.
	DopplerFsm(int outputs, double sample_rate_hz, std::int64_t phase_offset_cycles = 0);

	int outputs() const { return int(active_hz_.size()); }

	/// Loads `hz` as the live frequencies and sets committed coefficients for
	/// the update period containing `cycle`. The next step() is at `cycle`.
	void reset(std::span<const double> hz, std::int64_t cycle);
	/// Frequencies that take effect at the commit on `effective_cycle`.
	void stage(std::span<const double> hz, std::int64_t effective_cycle);

	/// Advances one cycle. Returns the committed set on a commit cycle.
	std::optional<std::span<const ComplexSample>> step();

	const ComplexSample& coefficient(int output) const { return committed_[std::size_t(output)]; }
	std::int64_t cycle() const { return cycle_; }

private:
	double frequency_for(int output, std::int64_t commit_cycle) const;
	ComplexSample generate(int output, std::int64_t commit_cycle);

	const DopplerLut* lut_;
	double sample_rate_hz_;
	std::int64_t offset_;
	std::int64_t cycle_ = 0;
	std::vector<double> active_hz_;
	std::vector<double> staged_hz_;
	std::int64_t staged_at_ = -1;
	std::vector<ComplexSample> committed_;
	std::vector<ComplexSample> pending_;
	std::vector<bool> pending_valid_;
	// Phase accumulator per output: word valid for `acc_time_` at `acc_hz_`.
	std::vector<std::uint32_t> acc_;
	std::vector<std::int64_t> acc_time_;
	std::vector<double> acc_hz_;
};

// ---------------------------------------------------------------------------
// Output stage and receiver
// ---------------------------------------------------------------------------

/// Per-output gains, both already lumped with path loss.
struct OutputStageGains {
	F16 g_t;
	F16 beta_rho;
};

/// (g_t * s1 + beta_rho * v) * doppler, accumulated wide and rounded once.
ComplexSample apply_output_stage(ComplexSample v_delayed, ComplexSample s1_delayed, const OutputStageGains& gains,
                                 ComplexSample doppler_coeff);

ComplexSample receiver_accumulate(std::span<const ComplexSample> inputs, std::span<const F16> g_rs);

/// One output lane behind the sample FIFO: FDC shift register, gain/Doppler
/// stage, and a fixed pipeline. A sample entering as the FDC lead leaves
/// `compute_latency - 1` cycles later; the link register adds the last cycle.
class OutputLane {
public:
	explicit OutputLane(int compute_latency);

	void configure(const FdcTaps& taps, OutputStageGains gains, bool transmit_source);
	/// Feeds this cycle's FIFO sample, returns this cycle's pipeline output.
	ComplexSample cycle(ComplexSample lead, ComplexSample doppler_coeff);

private:
	FdcWindow window_{};
	FdcTaps taps_ = FdcTaps::passthrough();
	OutputStageGains gains_{};
	bool transmit_source_ = false;
	std::vector<ComplexSample> pipe_;
	std::size_t head_ = 0;
};

}  // namespace rfemu
