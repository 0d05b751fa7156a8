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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "rfemu/numerics.hpp"

using namespace rfemu;

namespace {

// Independent decoders, written from the bit layouts alone.
double decode(std::uint16_t bits, int man_bits) {
	const int width = 6 + man_bits;
	const bool neg = (bits >> (width - 1)) & 1u;
	const int e = (bits >> man_bits) & 0x1F;
	const int m = bits & ((1 << man_bits) - 1);
	double v;
	if (e == 0) {
		v = std::ldexp(double(m), -14 - man_bits);
	} else if (e == 31) {
		v = m ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
	} else {
		v = std::ldexp(double((1 << man_bits) + m), e - 15 - man_bits);
	}
	return neg ? -v : v;
}

// Nearest finite pattern by exhaustive scan; ties go to the even mantissa.
std::uint16_t nearest_by_scan(double x, int man_bits) {
	const int n = 1 << (6 + man_bits);
	std::uint16_t best = 0;
	double best_d = std::numeric_limits<double>::infinity();
	for (int b = 0; b < n; ++b) {
		const double v = decode(std::uint16_t(b), man_bits);
		if (!std::isfinite(v)) continue;
		if (v == 0.0 && std::signbit(v) != std::signbit(x)) continue;
		const double d = std::fabs(v - x);
		if (d < best_d || (d == best_d && (b & 1) == 0 && (best & 1) == 1)) {
			best = std::uint16_t(b);
			best_d = d;
		}
	}
	return best;
}

}  // namespace

TEST_CASE("quantize_f16 fixed points") {
	CHECK(quantize_f16(0.0).bits() == 0x0000);
	CHECK(quantize_f16(-0.0).bits() == 0x8000);
	CHECK(quantize_f16(1.0).bits() == 0x3C00);
	// Frozen from numpy.float16: 0.2075 -> 0x32a4 (0.20751953125).
	CHECK(quantize_f16(0.2075).bits() == 0x32A4);
	CHECK(quantize_f16(0.2075).bits() == nearest_by_scan(0.2075, 10));
	CHECK(quantize_f16(0.1).bits() == 0x2E66);
	CHECK(quantize_f16(1.0 / 3.0).bits() == 0x3555);
	CHECK(quantize_f16(-2.5e-5).bits() == 0x81A3);
	CHECK(quantize_f16(1e-7).bits() == 0x0002);
	CHECK(quantize_f16(2.98e-8).bits() == 0x0000);
	// Ties to even: 1 + 2^-11 sits halfway between 0x3C00 and 0x3C01.
	CHECK(quantize_f16(1.00048828125).bits() == 0x3C00);
	CHECK(quantize_f16(1.000732421875).bits() == 0x3C01);
}

TEST_CASE("quantize_f16 saturates finite overflow, keeps infinities and NaN") {
	CHECK(quantize_f16(65504.0).bits() == 0x7BFF);
	CHECK(quantize_f16(70000.0).bits() == 0x7BFF);
	CHECK(quantize_f16(-1e30).bits() == 0xFBFF);
	CHECK(quantize_f16(std::numeric_limits<double>::infinity()).is_inf());
	CHECK(quantize_f16(-std::numeric_limits<double>::infinity()).bits() == 0xFC00);
	CHECK(quantize_f16(std::numeric_limits<double>::quiet_NaN()).is_nan());
}

TEST_CASE("F16 decode matches the independent decoder for every pattern") {
	for (int b = 0; b < 65536; ++b) {
		const F16 f = F16::from_bits(std::uint16_t(b));
		const double ref = decode(std::uint16_t(b), 10);
		if (std::isnan(ref)) {
			CHECK(std::isnan(f.value()));
			continue;
		}
		REQUIRE(f.value() == ref);
		// Round trip through decode -> encode is the identity on finite values.
		if (std::isfinite(ref)) REQUIRE(quantize_f16(ref).bits() == b);
	}
}

TEST_CASE("quantize_f16 agrees with an exhaustive scan on random reals") {
	std::mt19937_64 rng(7);
	std::uniform_real_distribution<double> mag(-20.0, 15.0);
	for (int i = 0; i < 300; ++i) {
		const double x = (i % 2 ? -1.0 : 1.0) * std::exp2(mag(rng));
		REQUIRE(quantize_f16(x).bits() == nearest_by_scan(x, 10));
	}
}

TEST_CASE("MiniF10 exhaustive table") {
	std::vector<double> table(1024);
	for (int b = 0; b < 1024; ++b) {
		table[std::size_t(b)] = decode(std::uint16_t(b), 4);
		const MiniF10 m = MiniF10::from_bits(std::uint16_t(b));
		if (std::isnan(table[std::size_t(b)])) {
			CHECK(m.is_nan());
			continue;
		}
		REQUIRE(m.value() == table[std::size_t(b)]);
		// Widening is exact and widen-then-quantize is the identity.
		REQUIRE(widen(m).value() == m.value());
		REQUIRE(quantize_f10(widen(m).value()).bits() == b);
	}
	CHECK(quantize_f10(0.0).bits() == 0);
	CHECK(quantize_f10(1.0).bits() == (15u << 4));
	CHECK(quantize_f10(1.0).value() == 1.0);
	// 0.3 = 1.2 * 2^-2 -> mantissa 3.2 rounds to 3 -> 0.296875.
	CHECK(quantize_f10(0.3).bits() == ((13u << 4) | 3u));
	CHECK(quantize_f10(0.3).value() == 0.296875);
	CHECK(quantize_f10(1e9).bits() == MiniF10::kMaxFinite);
	CHECK(quantize_f10(1e9).value() == 32768.0 * 31.0 / 16.0);
}

TEST_CASE("quantize_f10 on [1,2) lands on one of 16 mantissa steps") {
	std::mt19937_64 rng(11);
	std::uniform_real_distribution<double> u(1.0, 2.0);
	for (int i = 0; i < 2000; ++i) {
		const double x = u(rng);
		const MiniF10 q = quantize_f10(x);
		REQUIRE(q.bits() == nearest_by_scan(x, 4));
		const double steps = (q.value() - 1.0) * 16.0;
		REQUIRE(steps == std::round(steps));
		REQUIRE(q.value() >= 1.0);
		REQUIRE(q.value() <= 2.0);
	}
}

TEST_CASE("F16 -> MiniF10 -> F16 moves a value by at most one MiniF10 ulp") {
	for (int b = 0; b < 0x7C00; ++b) {
		const F16 f = F16::from_bits(std::uint16_t(b));
		const double back = widen(quantize_f10(f.value())).value();
		const int e = std::max(1, (b >> 10) & 0x1F);
		const double ulp10 = std::ldexp(1.0, e - 15 - 4);
		REQUIRE(std::fabs(back - f.value()) <= ulp10 * (1.0 + 1e-12));
	}
}

TEST_CASE("F16 idempotence and f10 mean relative error bound") {
	for (int b = 0; b < 0x7C00; ++b) {
		const double v = F16::from_bits(std::uint16_t(b)).value();
		REQUIRE(quantize_f16(v).value() == v);
	}
	std::mt19937_64 rng(3);
	std::uniform_real_distribution<double> u(-1.0, 1.0);
	double sum = 0.0;
	const int n = 100000;
	for (int i = 0; i < n; ++i) {
		const double x = quantize_f16(u(rng)).value();
		if (x == 0.0) continue;
		sum += std::fabs(quantize_f10(x).value() - x) / std::fabs(x);
	}
	CHECK(sum / n < 1.0 / 16.0);
}

TEST_CASE("cmac examples") {
	const auto one = ComplexSample::quantize({1.0, 0.0});
	const auto j = ComplexSample::quantize({0.0, 1.0});
	const auto x = ComplexSample::quantize({0.3, -0.7});
	CHECK(cmac(kZeroSample, one, x) == x);
	CHECK(cmac(kZeroSample, j, j).value() == std::complex<double>(-1.0, 0.0));
	// Saturating on overflow.
	const auto big = ComplexSample::quantize({60000.0, 0.0});
	CHECK(cmac(big, big, one).re.bits() == 0x7BFF);
}

TEST_CASE("cmac stays within 2 ulps of a double-precision reference") {
	std::mt19937_64 rng(2024);
	std::uniform_real_distribution<double> u(-4.0, 4.0);
	auto rnd = [&] { return ComplexSample::quantize({u(rng), u(rng)}); };
	for (int i = 0; i < 100000; ++i) {
		const auto acc = rnd(), a = rnd(), b = rnd();
		const auto ref = acc.value() + a.value() * b.value();
		const auto got = cmac(acc, a, b);
		REQUIRE(ulp_distance(got.re, quantize_f16(ref.real())) <= 2.0);
		REQUIRE(ulp_distance(got.im, quantize_f16(ref.imag())) <= 2.0);
		// A single output rounding makes it exactly the rounded reference.
		REQUIRE(got == ComplexSample::quantize(ref));
	}
}

TEST_CASE("cmac propagates NaN and infinity") {
	const auto inf = ComplexSample{F16::from_bits(0x7C00), F16{}};
	const auto one = ComplexSample::quantize({1.0, 0.0});
	CHECK(cmac(kZeroSample, inf, one).re.is_inf());
	const auto nan = ComplexSample{F16::from_bits(0x7E00), F16{}};
	CHECK(cmac(kZeroSample, nan, one).re.is_nan());
}

TEST_CASE("adder tree is balanced and zero-padded") {
	const F16 g1 = quantize_f16(1.0);
	const F16 gm1 = quantize_f16(-1.0);
	const auto x = ComplexSample::quantize({0.123, 0.456});
	{
		const ComplexSample in[] = {x};
		const F16 g[] = {g1};
		CHECK(adder_tree(in, g) == x);
	}
	{
		const ComplexSample in[] = {x, x};
		const F16 g[] = {g1, gm1};
		CHECK(adder_tree(in, g) == kZeroSample);
	}
	// Three inputs: ((a + b) + (c + 0)) with a rounding at each level.
	std::mt19937_64 rng(5);
	std::uniform_real_distribution<double> u(-1.0, 1.0);
	for (int i = 0; i < 1000; ++i) {
		const ComplexSample in[] = {ComplexSample::quantize({u(rng), u(rng)}), ComplexSample::quantize({u(rng), u(rng)}),
		                            ComplexSample::quantize({u(rng), u(rng)})};
		const F16 g[] = {quantize_f16(u(rng)), quantize_f16(u(rng)), quantize_f16(u(rng))};
		auto prod = [&](int k) { return ComplexSample::quantize(g[k].value() * in[k].value()); };
		const auto ab = ComplexSample::quantize(prod(0).value() + prod(1).value());
		const auto c0 = prod(2);
		const auto expect = ComplexSample::quantize(ab.value() + c0.value());
		REQUIRE(adder_tree(in, g) == expect);
	}
	CHECK(adder_tree({}, {}) == kZeroSample);
}
