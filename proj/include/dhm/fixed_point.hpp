// Copyright 2026 The dhmc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>

namespace dhm {

/// Signed two's-complement Q(total, frac) format. Raw r means r * 2^-frac.
struct FixedPointFormat {
  int total_bits = 8;
  int frac_bits = 7;

  int64_t min_raw() const { return -(int64_t{1} << (total_bits - 1)); }
  int64_t max_raw() const { return (int64_t{1} << (total_bits - 1)) - 1; }
  double to_real(int64_t raw) const;
  bool contains(int64_t raw) const { return raw >= min_raw() && raw <= max_raw(); }
  bool valid() const { return total_bits >= 2 && total_bits <= 32 && frac_bits >= 0 && frac_bits < total_bits; }

  bool operator==(const FixedPointFormat &) const = default;
};

std::string to_string(const FixedPointFormat &fmt);

int64_t saturate(int64_t value, const FixedPointFormat &fmt);

/// Arithmetic shift right by `shift` bits with round-half-away-from-zero.
/// Negative shifts are exact left shifts.
int64_t rounding_shift(int64_t value, int shift);

/// Moves a raw value with `from_frac` fractional bits into `to`, rounding
/// half away from zero and saturating.
int64_t requantize(int64_t value, int from_frac, const FixedPointFormat &to);

/// Integer division rounding half away from zero. `divisor` > 0.
int64_t rounding_divide(int64_t value, int64_t divisor);

/// Bits needed to accumulate `terms` products of two `bits`-wide operands
/// without overflow: 2*bits + ceil(log2(terms)).
int accumulator_bits(int bits, int64_t terms);

/// Entry of the tanh lookup table indexed by a raw value in `in`, expressed
/// in `out`.
int64_t tanh_lut_value(int64_t raw, const FixedPointFormat &in, const FixedPointFormat &out);

}  // namespace dhm
