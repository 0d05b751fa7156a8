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

namespace rfemu {

/// Binary minifloat with a 5-bit exponent (bias 15) and `ManBits` of mantissa.
/// Encoding rounds to nearest-even, keeps subnormals, and saturates finite
/// overflow to the largest finite magnitude. Infinities and NaN are kept.
template <int ManBits>
class MiniFloat {
public:
	static constexpr int kMantissaBits = ManBits;
	static constexpr int kExponentBits = 5;
	static constexpr int kBias = 15;
	static constexpr int kWidth = 1 + kExponentBits + ManBits;
	static constexpr std::uint16_t kSignMask = std::uint16_t(1u << (kWidth - 1));
	static constexpr std::uint16_t kExpMask = std::uint16_t(0x1Fu << ManBits);
	static constexpr std::uint16_t kManMask = std::uint16_t((1u << ManBits) - 1u);
	static constexpr std::uint16_t kMaxFinite = std::uint16_t((30u << ManBits) | kManMask);

	constexpr MiniFloat() = default;

	static constexpr MiniFloat from_bits(std::uint16_t bits) {
		MiniFloat f;
		f.bits_ = std::uint16_t(bits & ((1u << kWidth) - 1u));
		return f;
	}
	static MiniFloat quantize(double x);

	constexpr std::uint16_t bits() const { return bits_; }
	double value() const;
	explicit operator double() const { return value(); }

	bool is_nan() const { return (bits_ & kExpMask) == kExpMask && (bits_ & kManMask) != 0; }
	bool is_inf() const { return (bits_ & kExpMask) == kExpMask && (bits_ & kManMask) == 0; }
	bool is_finite() const { return (bits_ & kExpMask) != kExpMask; }

	friend constexpr bool operator==(MiniFloat a, MiniFloat b) { return a.bits_ == b.bits_; }

private:
	std::uint16_t bits_ = 0;
};

/// IEEE-754 binary16 layout: data samples and most coefficients.
using F16 = MiniFloat<10>;
/// 10-bit coefficient format of the fractional-delay filter taps.
using MiniF10 = MiniFloat<4>;

F16 quantize_f16(double x);
MiniF10 quantize_f10(double x);

/// Exact: both formats share the exponent field.
F16 widen(MiniF10 x);

/// Distance between two finite F16 values in units of the larger one's ulp.
double ulp_distance(F16 a, F16 b);
/// Size of one unit in the last place at the magnitude of `x` (F16 grid).
double f16_ulp(double x);

struct ComplexSample {
	F16 re;
	F16 im;

	static ComplexSample quantize(std::complex<double> z) {
		return {quantize_f16(z.real()), quantize_f16(z.imag())};
	}
	std::complex<double> value() const { return {re.value(), im.value()}; }
	friend bool operator==(const ComplexSample&, const ComplexSample&) = default;
};

inline const ComplexSample kZeroSample{};

/// acc + a*b, evaluated in double precision and rounded once per component.
ComplexSample cmac(ComplexSample acc, ComplexSample a, ComplexSample b);

/// Real-coefficient product `g*x`, one rounding per component.
ComplexSample scale(F16 g, ComplexSample x);

/// Sum of `g[i]*x[i]` through a balanced binary adder tree. Products are
/// rounded first, then each tree level rounds its sums; the input list is
/// padded with zeros to the next power of two.
ComplexSample adder_tree(std::span<const ComplexSample> x, std::span<const F16> g);

}  // namespace rfemu
