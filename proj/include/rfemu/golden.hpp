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
#include <span>
#include <vector>

namespace rfemu {

/// Propagation speed used for every delay/range conversion in the project.
inline constexpr double kSpeedOfLight = 2.998e8;

using Stream = std::vector<std::complex<double>>;

struct SphericalAngle {
	double azimuth = 0.0;    ///< radians, [-pi, pi)
	double elevation = 0.0;  ///< radians, [-pi/2, pi/2]
};

/// Real gain sampled on an azimuth x elevation grid. Azimuth interpolation is
/// linear and periodic; elevation interpolation is linear and clamps at the ends.
class AngleTable {
public:
	AngleTable() : AngleTable(1.0) {}
	explicit AngleTable(double constant);
	AngleTable(std::vector<double> azimuths, std::vector<double> elevations, std::vector<double> values);

	double operator()(SphericalAngle a) const;
	double min_value() const;

private:
	std::vector<double> az_;
	std::vector<double> el_;
	std::vector<double> values_;  // row-major [elevation][azimuth]
};

/// Separable scattering response sigma(in, out) = alpha(in) * beta(out).
struct RcsProfile {
	AngleTable alpha;
	AngleTable beta;
	double sigma(SphericalAngle in, SphericalAngle out) const { return alpha(in) * beta(out); }
};

struct AntennaPattern {
	AngleTable g_t;
	AngleTable g_r;
};

/// Amplitude path loss reference_gain * (reference_distance / d)^exponent.
struct PathLossModel {
	double exponent = 1.0;
	double reference_distance = 1.0;  ///< meters
	double reference_gain = 1.0;

	double at_distance(double meters) const;
	double at_delay(double tau_seconds) const { return at_distance(kSpeedOfLight * tau_seconds); }
};

struct LinkParams {
	double tau = 0.0;  ///< seconds
	double doppler_hz = 0.0;
	SphericalAngle theta_in;
	SphericalAngle theta_out;
};

struct OutputGains {
	AntennaPattern antenna;
	RcsProfile rcs;
	PathLossModel path_loss;
};

/// v(t) = sum_m alpha_m * s_m(t).
Stream intermediate_signal(std::span<const Stream> inputs, std::span<const double> alphas);

/// r(t) = sum_m g_r[m] * s_m(t).
Stream receive_signal(std::span<const Stream> inputs, std::span<const double> g_rs);

/// Interpolated value of `x` at (possibly fractional) index `t - delay`.
/// Integer delays are a plain shift; otherwise a 64-tap Kaiser-windowed sinc
/// (beta 8) centred on the fractional position. Out-of-range samples are zero.
std::complex<double> delayed_sample(std::span<const std::complex<double>> x, std::int64_t t, double delay);

inline constexpr int kSincTaps = 64;
inline constexpr double kKaiserBeta = 8.0;

/// Windowed-sinc weights for a fractional delay mu in [0, 1). Weight k applies
/// to x[t - floor(delay) + kSincTaps/2 - 1 - k].
std::vector<double> sinc_kernel(double mu);

/// s_i(t) = rho(tau) e^{-j 2 pi f t} [G_T s1(t - tau) + beta v(t - tau)].
/// Either `s1` or `v` may be empty when the node has no such term.
Stream output_signal(std::span<const std::complex<double>> s1, std::span<const std::complex<double>> v,
                     const LinkParams& link, const OutputGains& gains, double sample_rate_hz);

/// One directed link of a scene with every gain already evaluated. `g_t` and
/// `beta_rho` include path loss.
struct GoldenLink {
	int src = 0;
	int dst = 0;
	double delay_samples = 0.0;
	double doppler_hz = 0.0;
	double alpha = 0.0;
	double beta_rho = 0.0;
	double g_t = 0.0;
	double g_r = 0.0;
};

struct GoldenNode {
	bool transmits = false;
	bool reflects = false;
	bool receives = false;
	Stream source;  ///< transmitted samples; zero past the end
};

/// Scene parameters in double precision. Link sets may change every
/// `scenario_length` samples; the last set persists.
struct GoldenScene {
	double sample_rate_hz = 1.0;
	std::int64_t scenario_length = 0;
	std::vector<GoldenNode> nodes;
	std::vector<std::vector<GoldenLink>> scenarios;
};

struct GoldenResult {
	std::vector<Stream> received;  ///< one per node; empty for non-receivers
};

/// Sample-by-sample evaluation of the whole communication graph, including
/// re-reflections between passive nodes.
GoldenResult golden_scene_run(const GoldenScene& scene, std::int64_t duration);

}  // namespace rfemu
