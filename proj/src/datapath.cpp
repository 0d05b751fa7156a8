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

#include "rfemu/datapath.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rfemu/errors.hpp"

namespace rfemu {

int DrfgConfig::active_slots() const { return int(std::lround(duty_cycle * double(period))); }

void DrfgConfig::validate() const {
	if (period < 1 || period > kDrfgMaxPeriod) {
		throw ConfigError("DRFG period " + std::to_string(period) + " outside [1, 2048]");
	}
	if (duty_cycle < kDrfgMinDuty - 1e-12 || duty_cycle > 1.0) {
		throw ConfigError("DRFG duty cycle " + std::to_string(duty_cycle) + " outside [3.125%, 100%]");
	}
	if (active_slots() < 1) throw ConfigError("DRFG duty cycle leaves no active sample");
	if (int(iq_pattern.size()) != active_slots()) {
		throw ConfigError("DRFG pattern has " + std::to_string(iq_pattern.size()) + " samples for " +
		                  std::to_string(active_slots()) + " active slots");
	}
}

ComplexSample drfg_step(const DrfgConfig& cfg, std::int64_t cycle) {
	const auto slot = std::size_t(cycle % cfg.period);
	return slot < cfg.iq_pattern.size() ? cfg.iq_pattern[slot] : kZeroSample;
}

std::array<double, 4> lagrange4(double mu) {
	// Nodes sit at delays -1, 0, 1, 2 relative to x[n].
	constexpr std::array<double, 4> kNodes{-1.0, 0.0, 1.0, 2.0};
	std::array<double, 4> h{};
	for (int k = 0; k < 4; ++k) {
		double w = 1.0;
		for (int m = 0; m < 4; ++m) {
			if (m != k) w *= (mu - kNodes[m]) / (kNodes[k] - kNodes[m]);
		}
		h[k] = w;
	}
	return h;
}

FdcTaps FdcTaps::passthrough() {
	FdcTaps t;
	t.taps = {quantize_f10(0.0), quantize_f10(1.0), quantize_f10(0.0), quantize_f10(0.0)};
	return t;
}

FdcTaps FdcTaps::for_delay(double mu) {
	const auto h = lagrange4(mu);
	FdcTaps t;
	for (int k = 0; k < 4; ++k) t.taps[k] = quantize_f10(h[k] + 0.0);  // no negative zeros
	return t;
}

std::array<F16, 4> FdcTaps::widened() const {
	return {widen(taps[0]), widen(taps[1]), widen(taps[2]), widen(taps[3])};
}

double FdcTaps::dc_gain() const {
	double g = 0.0;
	for (const auto& t : taps) g += widen(t).value();
	return g;
}

ComplexSample fdc_apply(const FdcWindow& window, const std::array<F16, 4>& taps) {
	std::complex<double> acc{};
	for (int k = 0; k < 4; ++k) acc += taps[k].value() * window[k].value();
	return ComplexSample::quantize(acc);
}

ComplexSample fdc_apply(const FdcWindow& window, const FdcTaps& taps) { return fdc_apply(window, taps.widened()); }

DopplerLut::DopplerLut() {
	for (int k = 0; k < kQuarterEntries; ++k) {
		table_[std::size_t(k)] = quantize_f16(std::sin(0.5 * std::numbers::pi * double(k) / kQuarterEntries));
	}
}

F16 DopplerLut::sine(int index) const {
	const int quadrant = index >> 10;
	const int k = index & (kQuarterEntries - 1);
	// sin at exactly a quarter turn is not stored; it is the constant 1.
	auto rising = [&](int i) { return i == kQuarterEntries ? quantize_f16(1.0) : table_[std::size_t(i)]; };
	F16 mag = (quadrant & 1) ? rising(kQuarterEntries - k) : rising(k);
	if (quadrant >= 2 && mag.bits() != 0) mag = F16::from_bits(std::uint16_t(mag.bits() ^ F16::kSignMask));
	return mag;
}

ComplexSample DopplerLut::coefficient(std::uint32_t phase_word) const {
	constexpr int kShift = 32 - kPhaseBits;
	const auto index = int(((std::uint64_t(phase_word) + (1ull << (kShift - 1))) >> kShift) & ((1u << kPhaseBits) - 1));
	const F16 s = sine(index);
	const F16 c = sine((index + kQuarterEntries) & ((1 << kPhaseBits) - 1));
	return {c, s.bits() == 0 ? s : F16::from_bits(std::uint16_t(s.bits() ^ F16::kSignMask))};
}

std::uint32_t doppler_phase_word(double freq_hz, double cycles, double sample_rate_hz) {
	double turns = std::fmod(freq_hz * cycles / sample_rate_hz, 1.0);
	if (turns < 0) turns += 1.0;
	return std::uint32_t(std::uint64_t(std::llround(std::ldexp(turns, 32))) & 0xFFFFFFFFull);
}

namespace {
const DopplerLut& shared_lut() {
	static const DopplerLut lut;
	return lut;
}
}  // namespace

DopplerFsm::DopplerFsm(int outputs, double sample_rate_hz, std::int64_t phase_offset_cycles)
    : lut_(&shared_lut()), sample_rate_hz_(sample_rate_hz), offset_(phase_offset_cycles) {
	if (outputs > kMaxOutputs) {
		throw ConfigError("Doppler FSM asked to serve " + std::to_string(outputs) +
		                  " outputs; one unit sustains at most 4 at the 256-cycle update rate. "
		                  "Add a second Doppler FSM unit or reduce the Doppler update rate.");
	}
	if (outputs < 0) throw ConfigError("negative Doppler output count");
	const auto n = std::size_t(outputs);
	active_hz_.assign(n, 0.0);
	staged_hz_.assign(n, 0.0);
	committed_.assign(n, ComplexSample{quantize_f16(1.0), quantize_f16(0.0)});
	pending_.assign(n, kZeroSample);
	pending_valid_.assign(n, false);
	acc_.assign(n, 0);
	acc_time_.assign(n, -1);
	acc_hz_.assign(n, 0.0);
}

void DopplerFsm::reset(std::span<const double> hz, std::int64_t cycle) {
	if (hz.size() != active_hz_.size()) throw ConfigError("Doppler frequency count does not match FSM outputs");
	active_hz_.assign(hz.begin(), hz.end());
	staged_at_ = -1;
	cycle_ = cycle;
	const std::int64_t block = cycle - cycle % kUpdatePeriod;
	for (int k = 0; k < outputs(); ++k) {
		acc_time_[std::size_t(k)] = -1;
		committed_[std::size_t(k)] = generate(k, block);
		pending_valid_[std::size_t(k)] = false;
	}
}

void DopplerFsm::stage(std::span<const double> hz, std::int64_t effective_cycle) {
	if (hz.size() != active_hz_.size()) throw ConfigError("Doppler frequency count does not match FSM outputs");
	if (effective_cycle % kUpdatePeriod != 0) {
		throw ConfigError("Doppler frequency change must land on a 256-cycle commit boundary");
	}
	staged_hz_.assign(hz.begin(), hz.end());
	staged_at_ = effective_cycle;
}

double DopplerFsm::frequency_for(int output, std::int64_t commit_cycle) const {
	const auto k = std::size_t(output);
	return (staged_at_ >= 0 && commit_cycle >= staged_at_) ? staged_hz_[k] : active_hz_[k];
}

ComplexSample DopplerFsm::generate(int output, std::int64_t commit_cycle) {
	const auto k = std::size_t(output);
	const double f = frequency_for(output, commit_cycle);
	const double t = double(commit_cycle + offset_);
	if (acc_time_[k] >= 0 && acc_hz_[k] == f && acc_time_[k] + kUpdatePeriod == commit_cycle) {
		acc_[k] += doppler_phase_word(f, kUpdatePeriod, sample_rate_hz_);
	} else {
		acc_[k] = doppler_phase_word(f, t, sample_rate_hz_);
	}
	acc_time_[k] = commit_cycle;
	acc_hz_[k] = f;
	return lut_->coefficient(acc_[k]);
}

std::optional<std::span<const ComplexSample>> DopplerFsm::step() {
	const std::int64_t c = cycle_++;
	const int ctr = int(c % kUpdatePeriod);
	std::optional<std::span<const ComplexSample>> committed;
	if (ctr == 0) {
		bool any = false;
		for (std::size_t k = 0; k < committed_.size(); ++k) {
			if (pending_valid_[k]) {
				committed_[k] = pending_[k];
				pending_valid_[k] = false;
				any = true;
			}
		}
		if (staged_at_ >= 0 && c >= staged_at_) {
			active_hz_ = staged_hz_;
			staged_at_ = -1;
		}
		if (any) committed = std::span<const ComplexSample>(committed_);
	}
	// Round-robin slots: output k finishes at the end of slot k.
	if (ctr % kGenerationCycles == kGenerationCycles - 1) {
		const int slot = ctr / kGenerationCycles;
		if (slot < outputs()) {
			const std::int64_t next_commit = c - ctr + kUpdatePeriod;
			pending_[std::size_t(slot)] = generate(slot, next_commit);
			pending_valid_[std::size_t(slot)] = true;
		}
	}
	return committed;
}

ComplexSample apply_output_stage(ComplexSample v_delayed, ComplexSample s1_delayed, const OutputStageGains& gains,
                                 ComplexSample doppler_coeff) {
	// Gain MACs and the Doppler rotation share one wide accumulator; the only
	// rounding is at the output register.
	const auto body = gains.g_t.value() * s1_delayed.value() + gains.beta_rho.value() * v_delayed.value();
	return ComplexSample::quantize(body * doppler_coeff.value());
}

ComplexSample receiver_accumulate(std::span<const ComplexSample> inputs, std::span<const F16> g_rs) {
	if (inputs.size() != g_rs.size()) throw ConfigError("receiver needs one gain per input");
	return adder_tree(inputs, g_rs);
}

OutputLane::OutputLane(int compute_latency) {
	if (compute_latency < 2) throw ConfigError("compute latency must cover the FDC register and link hop (>= 2)");
	pipe_.assign(std::size_t(compute_latency - 2), kZeroSample);
}

void OutputLane::configure(const FdcTaps& taps, OutputStageGains gains, bool transmit_source) {
	taps_ = taps;
	gains_ = gains;
	transmit_source_ = transmit_source;
}

ComplexSample OutputLane::cycle(ComplexSample lead, ComplexSample doppler_coeff) {
	window_ = {lead, window_[0], window_[1], window_[2]};
	const ComplexSample x = fdc_apply(window_, taps_);
	const ComplexSample y = transmit_source_ ? apply_output_stage(kZeroSample, x, gains_, doppler_coeff)
	                                         : apply_output_stage(x, kZeroSample, gains_, doppler_coeff);
	if (pipe_.empty()) return y;
	const ComplexSample out = pipe_[head_];
	pipe_[head_] = y;
	head_ = (head_ + 1) % pipe_.size();
	return out;
}

}  // namespace rfemu
