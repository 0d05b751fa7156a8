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

#include "rfemu/numerics.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

namespace rfemu {

template <int ManBits>
MiniFloat<ManBits> MiniFloat<ManBits>::quantize(double x) {
	constexpr std::uint16_t kNaN = std::uint16_t(kExpMask | (1u << (ManBits - 1)));
	if (std::isnan(x)) return from_bits(kNaN);
	const std::uint16_t sign = std::signbit(x) ? kSignMask : 0;
	const double a = std::fabs(x);
	if (std::isinf(a)) return from_bits(std::uint16_t(sign | kExpMask));
	if (a == 0.0) return from_bits(sign);

	int e2 = 0;
	std::frexp(a, &e2);  // a = f * 2^e2, f in [0.5, 1)
	int e = e2 - 1;      // a = m * 2^e, m in [1, 2)
	constexpr int kMinExp = 1 - kBias;

	if (e < kMinExp) {
		// Subnormal grid: multiples of 2^(kMinExp - ManBits). A carry into the
		// exponent field yields the smallest normal, which is the right answer.
		const double n = std::nearbyint(std::ldexp(a, ManBits - kMinExp));
		return from_bits(std::uint16_t(sign | std::uint16_t(n)));
	}
	double n = std::nearbyint(std::ldexp(a, ManBits - e)) - double(1u << ManBits);
	if (n >= double(1u << ManBits)) {
		n = 0;
		++e;
	}
	if (e > kBias) return from_bits(std::uint16_t(sign | kMaxFinite));
	return from_bits(std::uint16_t(sign | ((e + kBias) << ManBits) | std::uint16_t(n)));
}

template <int ManBits>
double MiniFloat<ManBits>::value() const {
	const bool neg = (bits_ & kSignMask) != 0;
	const int exp = (bits_ & kExpMask) >> ManBits;
	const int man = bits_ & kManMask;
	double v;
	if (exp == 0x1F) {
		v = man ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
	} else if (exp == 0) {
		v = std::ldexp(double(man), 1 - kBias - ManBits);
	} else {
		v = std::ldexp(double(man + (1 << ManBits)), exp - kBias - ManBits);
	}
	return neg ? -v : v;
}

template class MiniFloat<10>;
template class MiniFloat<4>;

F16 quantize_f16(double x) { return F16::quantize(x); }
MiniF10 quantize_f10(double x) { return MiniF10::quantize(x); }

F16 widen(MiniF10 x) {
	const std::uint16_t b = x.bits();
	const std::uint16_t sign = (b & MiniF10::kSignMask) ? F16::kSignMask : 0;
	return F16::from_bits(std::uint16_t(sign | ((b & 0x1FFu) << 6)));
}

double f16_ulp(double x) {
	const double a = std::fabs(x);
	if (a < std::ldexp(1.0, -14)) return std::ldexp(1.0, -24);
	int e2 = 0;
	std::frexp(a, &e2);
	return std::ldexp(1.0, (e2 - 1) - 10);
}

double ulp_distance(F16 a, F16 b) {
	const double x = a.value();
	const double y = b.value();
	const double u = std::max(f16_ulp(x), f16_ulp(y));
	return std::fabs(x - y) / u;
}

ComplexSample cmac(ComplexSample acc, ComplexSample a, ComplexSample b) {
	return ComplexSample::quantize(acc.value() + a.value() * b.value());
}

ComplexSample scale(F16 g, ComplexSample x) {
	const double k = g.value();
	return {quantize_f16(k * x.re.value()), quantize_f16(k * x.im.value())};
}

ComplexSample adder_tree(std::span<const ComplexSample> x, std::span<const F16> g) {
	assert(x.size() == g.size());
	if (x.empty()) return kZeroSample;
	std::vector<ComplexSample> level(std::bit_ceil(x.size()), kZeroSample);
	for (std::size_t i = 0; i < x.size(); ++i) level[i] = scale(g[i], x[i]);
	while (level.size() > 1) {
		const std::size_t half = level.size() / 2;
		for (std::size_t i = 0; i < half; ++i) {
			level[i] = ComplexSample::quantize(level[2 * i].value() + level[2 * i + 1].value());
		}
		level.resize(half);
	}
	return level.front();
}

}  // namespace rfemu
