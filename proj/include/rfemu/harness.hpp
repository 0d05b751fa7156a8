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

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfemu/controlpath.hpp"
#include "rfemu/golden.hpp"
#include "rfemu/scenario.hpp"

namespace rfemu {

struct RunOptions {
	int threads = 1;  ///< 0: one per hardware thread
};

struct NodeStats {
	std::string id;
	int outputs = 0;
	int doppler_units = 0;
	ControlpathCounters controlpath;
};

/// Result of a cycle-level run. `captured[j]` holds the receiver stream of
/// node j, one sample per cycle (empty for nodes that do not receive).
struct EmulationRun {
	std::string preset;
	double sample_rate_hz = 0.0;
	std::int64_t n_cycles = 0;
	std::int64_t scenario_length = 0;
	int scenarios_applied = 0;
	std::vector<std::pair<int, int>> links;
	std::vector<std::vector<ComplexSample>> captured;
	std::vector<NodeStats> nodes;
	ControlpathCounters totals;
	std::int64_t doppler_commits = 0;

	std::vector<int> receivers() const;
};

EmulationRun run_emulation(const Scene& scene, const Preset& preset, std::span<const ScenarioConfigPacket> scps,
                           std::int64_t n_cycles, const RunOptions& opts = {});

/// Double-precision reference for the same scene: exact delays and gains
/// from the solver, transmit streams taken from the DUT waveform generators.
GoldenScene build_golden_scene(const Scene& scene, const Preset& preset, std::span<const FrameSolution> frames,
                               std::int64_t n_cycles);

/// Transmit samples of `waveform` for cycles [0, n), widened to double.
Stream transmit_stream(const TxWaveform& waveform, std::int64_t n);

Stream to_stream(std::span<const ComplexSample> x);

/// |sum_k captured[n + k] * conj(reference[k])| for every lag n >= 0.
std::vector<double> matched_filter(std::span<const std::complex<double>> captured,
                                   std::span<const std::complex<double>> reference);

struct Peak {
	std::int64_t index = 0;  ///< integer lag of the local maximum
	double lag = 0.0;        ///< parabolic refinement of `index`
	double amplitude = 0.0;
};

struct PeakOptions {
	double threshold_frac = 0.3;
	std::int64_t min_separation = 16;
};

/// Returned in ascending lag order.
std::vector<Peak> detect_peaks(std::span<const double> corr, const PeakOptions& opts = {});

struct RangeMatch {
	double expected_m = 0.0;
	std::optional<Peak> peak;  ///< empty: miss
	double est_range_m = 0.0;
	double error_m = 0.0;
	double error_pct = 0.0;
};

struct RangeReport {
	std::vector<Peak> peaks;
	std::vector<double> est_ranges_m;
	std::vector<RangeMatch> matches;  ///< one per expected range
	int misses = 0;
	double mse = 0.0;  ///< over matched expectations only, m^2
};

/// Peaks are converted with est = lag * meters_per_sample (c / f_s for a
/// one-way path) and assigned to the nearest expectation, each peak at most once.
RangeReport range_metrics(std::span<const Peak> peaks, std::span<const double> expected_ranges_m,
                          double meters_per_sample);

struct GoldenComparison {
	double rms_rel_error = 0.0;
	double max_abs_error = 0.0;
	std::int64_t samples = 0;
};

/// Throws ConfigError on a length mismatch or when the warm-up leaves no samples.
GoldenComparison compare_to_golden(std::span<const ComplexSample> dut, std::span<const std::complex<double>> golden,
                                   std::int64_t warmup);

/// Default warm-up discard: one scenario length plus the largest buffer delay.
std::int64_t default_warmup(const Scene& scene, const Preset& preset);

std::string instrumentation_json(const EmulationRun& run);

/// Captured I/Q of every receiver, one `cycle,node,i,q` row per sample.
std::string capture_csv(const EmulationRun& run);
/// Parses capture_csv output back into per-node streams (keyed by node id).
std::vector<std::pair<std::string, std::vector<ComplexSample>>> parse_capture_csv(std::string_view text);
std::string correlation_csv(std::span<const double> corr);
std::string range_report_json(const RangeReport& report);

}  // namespace rfemu
