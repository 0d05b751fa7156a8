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

#include "rfemu/golden.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rfemu/errors.hpp"

namespace rfemu {

namespace {

double wrap_azimuth(double az) {
	constexpr double kTwoPi = 2.0 * std::numbers::pi;
	double r = std::fmod(az + std::numbers::pi, kTwoPi);
	if (r < 0) r += kTwoPi;
	return r - std::numbers::pi;
}

void check_lengths(std::span<const Stream> inputs, std::size_t weights, const char* what) {
	if (inputs.size() != weights) {
		throw ConfigError(std::string(what) + ": " + std::to_string(inputs.size()) + " streams but " +
		                  std::to_string(weights) + " weights");
	}
	for (const auto& s : inputs) {
		if (s.size() != inputs.front().size()) throw ConfigError(std::string(what) + ": stream lengths differ");
	}
}

Stream weighted_sum(std::span<const Stream> inputs, std::span<const double> w) {
	if (inputs.empty()) return {};
	Stream out(inputs.front().size());
	for (std::size_t t = 0; t < out.size(); ++t) {
		std::complex<double> acc{};
		for (std::size_t m = 0; m < inputs.size(); ++m) acc += w[m] * inputs[m][t];
		out[t] = acc;
	}
	return out;
}

}  // namespace

AngleTable::AngleTable(double constant) : az_{0.0}, el_{0.0}, values_{constant} {}

AngleTable::AngleTable(std::vector<double> azimuths, std::vector<double> elevations, std::vector<double> values)
    : az_(std::move(azimuths)), el_(std::move(elevations)), values_(std::move(values)) {
	if (az_.empty() || el_.empty()) throw ConfigError("angle table needs at least one azimuth and one elevation");
	if (values_.size() != az_.size() * el_.size()) {
		throw ConfigError("angle table has " + std::to_string(values_.size()) + " values, expected " +
		                  std::to_string(az_.size() * el_.size()));
	}
	if (!std::is_sorted(az_.begin(), az_.end()) || !std::is_sorted(el_.begin(), el_.end())) {
		throw ConfigError("angle table grid must be ascending");
	}
	for (double a : az_) {
		if (a < -std::numbers::pi || a >= std::numbers::pi) throw ConfigError("azimuth grid outside [-pi, pi)");
	}
}

double AngleTable::operator()(SphericalAngle a) const {
	const std::size_t naz = az_.size();
	const double az = wrap_azimuth(a.azimuth);

	// Periodic bracket in azimuth.
	std::size_t i1 = std::upper_bound(az_.begin(), az_.end(), az) - az_.begin();
	std::size_t i0 = (i1 + naz - 1) % naz;
	i1 %= naz;
	double span = az_[i1] - az_[i0];
	double off = az - az_[i0];
	if (span <= 0) span += 2.0 * std::numbers::pi;
	if (off < 0) off += 2.0 * std::numbers::pi;
	const double fa = (naz == 1) ? 0.0 : off / span;

	double el = std::clamp(a.elevation, el_.front(), el_.back());
	std::size_t j1 = std::upper_bound(el_.begin(), el_.end(), el) - el_.begin();
	std::size_t j0 = j1 == 0 ? 0 : j1 - 1;
	j1 = std::min(j1, el_.size() - 1);
	const double fe = (j1 == j0) ? 0.0 : (el - el_[j0]) / (el_[j1] - el_[j0]);

	auto at = [&](std::size_t j, std::size_t i) { return values_[j * naz + i]; };
	const double lo = at(j0, i0) + fa * (at(j0, i1) - at(j0, i0));
	const double hi = at(j1, i0) + fa * (at(j1, i1) - at(j1, i0));
	return lo + fe * (hi - lo);
}

double AngleTable::min_value() const { return *std::min_element(values_.begin(), values_.end()); }

double PathLossModel::at_distance(double meters) const {
	if (!(meters > 0)) throw DomainError("path loss needs a positive distance");
	return reference_gain * std::pow(reference_distance / meters, exponent);
}

Stream intermediate_signal(std::span<const Stream> inputs, std::span<const double> alphas) {
	check_lengths(inputs, alphas.size(), "intermediate_signal");
	return weighted_sum(inputs, alphas);
}

Stream receive_signal(std::span<const Stream> inputs, std::span<const double> g_rs) {
	check_lengths(inputs, g_rs.size(), "receive_signal");
	return weighted_sum(inputs, g_rs);
}

std::vector<double> sinc_kernel(double mu) {
	std::vector<double> h(kSincTaps);
	const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
	constexpr double kHalf = kSincTaps / 2;
	for (int k = 0; k < kSincTaps; ++k) {
		const double arg = double(k - (kSincTaps / 2 - 1)) - mu;
		const double r = arg / kHalf;
		const double w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
		const double s = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
		h[k] = w * s;
	}
	return h;
}

std::complex<double> delayed_sample(std::span<const std::complex<double>> x, std::int64_t t, double delay) {
	const double whole = std::floor(delay);
	const double mu = delay - whole;
	const std::int64_t base = t - std::int64_t(whole);
	auto at = [&](std::int64_t i) -> std::complex<double> {
		return (i >= 0 && i < std::int64_t(x.size())) ? x[std::size_t(i)] : std::complex<double>{};
	};
	if (mu == 0.0) return at(base);
	const auto h = sinc_kernel(mu);
	std::complex<double> acc{};
	for (int k = 0; k < kSincTaps; ++k) acc += h[k] * at(base + kSincTaps / 2 - 1 - k);
	return acc;
}

Stream output_signal(std::span<const std::complex<double>> s1, std::span<const std::complex<double>> v,
                     const LinkParams& link, const OutputGains& gains, double sample_rate_hz) {
	if (!(link.tau > 0)) throw DomainError("output_signal: delay must be positive");
	const std::size_t n = std::max(s1.size(), v.size());
	const double rho = gains.path_loss.at_delay(link.tau);
	const double gt = gains.antenna.g_t(link.theta_out);
	const double beta = gains.rcs.beta(link.theta_out);
	const double delay = link.tau * sample_rate_hz;
	Stream out(n);
	for (std::size_t t = 0; t < n; ++t) {
		std::complex<double> body{};
		if (!s1.empty()) body += gt * delayed_sample(s1, std::int64_t(t), delay);
		if (!v.empty()) body += beta * delayed_sample(v, std::int64_t(t), delay);
		const double phase = -2.0 * std::numbers::pi * link.doppler_hz * double(t) / sample_rate_hz;
		out[t] = rho * std::polar(1.0, phase) * body;
	}
	return out;
}

namespace {

struct PreparedLink {
	GoldenLink p;
	std::int64_t whole = 0;
	std::vector<double> kernel;  // empty for integer delays
};

std::vector<PreparedLink> prepare(const std::vector<GoldenLink>& links, std::size_t nodes) {
	std::vector<PreparedLink> out;
	for (const auto& l : links) {
		if (l.src < 0 || l.dst < 0 || std::size_t(l.src) >= nodes || std::size_t(l.dst) >= nodes) {
			throw ConfigError("golden link references an unknown node");
		}
		if (!(l.delay_samples >= 1.0)) {
			throw DomainError("link " + std::to_string(l.src) + "->" + std::to_string(l.dst) +
			                  " delay is below one sample period");
		}
		PreparedLink pl{l, std::int64_t(std::floor(l.delay_samples)), {}};
		const double mu = l.delay_samples - double(pl.whole);
		if (mu != 0.0) {
			if (pl.whole < kSincTaps / 2) {
				throw DomainError("link " + std::to_string(l.src) + "->" + std::to_string(l.dst) +
				                  " fractional delay shorter than the interpolator half-width");
			}
			pl.kernel = sinc_kernel(mu);
		}
		out.push_back(std::move(pl));
	}
	return out;
}

}  // namespace

GoldenResult golden_scene_run(const GoldenScene& scene, std::int64_t duration) {
	const std::size_t n_nodes = scene.nodes.size();
	if (scene.scenarios.empty()) throw ConfigError("golden scene has no link sets");
	if (scene.scenarios.size() > 1 && scene.scenario_length <= 0) throw ConfigError("scenario length must be positive");

	std::vector<std::vector<PreparedLink>> sets;
	for (const auto& s : scene.scenarios) sets.push_back(prepare(s, n_nodes));

	const auto len = std::size_t(std::max<std::int64_t>(duration, 0));
	std::vector<Stream> s1(n_nodes), v(n_nodes);
	GoldenResult res;
	res.received.resize(n_nodes);
	for (std::size_t i = 0; i < n_nodes; ++i) {
		if (scene.nodes[i].transmits) s1[i].assign(len, {});
		if (scene.nodes[i].reflects) v[i].assign(len, {});
		if (scene.nodes[i].receives) res.received[i].assign(len, {});
	}

	auto history = [&](const Stream& x, std::int64_t i) -> std::complex<double> {
		return (i >= 0 && !x.empty()) ? x[std::size_t(i)] : std::complex<double>{};
	};
	auto delayed = [&](const Stream& x, const PreparedLink& l, std::int64_t t) {
		const std::int64_t base = t - l.whole;
		if (l.kernel.empty()) return history(x, base);
		std::complex<double> acc{};
		for (int k = 0; k < kSincTaps; ++k) acc += l.kernel[k] * history(x, base + kSincTaps / 2 - 1 - k);
		return acc;
	};

	const double two_pi = 2.0 * std::numbers::pi;
	for (std::int64_t t = 0; t < std::int64_t(len); ++t) {
		std::size_t si = 0;
		if (scene.scenario_length > 0) {
			si = std::min<std::size_t>(std::size_t(t / scene.scenario_length), sets.size() - 1);
		}
		for (const auto& l : sets[si]) {
			const auto src = std::size_t(l.p.src);
			std::complex<double> body{};
			if (scene.nodes[src].transmits) body += l.p.g_t * delayed(s1[src], l, t);
			if (scene.nodes[src].reflects) body += l.p.beta_rho * delayed(v[src], l, t);
			const double phase = -two_pi * l.p.doppler_hz * double(t) / scene.sample_rate_hz;
			const auto s = std::polar(1.0, phase) * body;
			const auto dst = std::size_t(l.p.dst);
			if (scene.nodes[dst].reflects) v[dst][std::size_t(t)] += l.p.alpha * s;
			if (scene.nodes[dst].receives) res.received[dst][std::size_t(t)] += l.p.g_r * s;
		}
		for (std::size_t i = 0; i < n_nodes; ++i) {
			const auto& src = scene.nodes[i].source;
			if (scene.nodes[i].transmits && std::size_t(t) < src.size()) s1[i][std::size_t(t)] = src[std::size_t(t)];
		}
	}
	return res;
}

}  // namespace rfemu
