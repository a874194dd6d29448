/*
 * Copyright 2026 The Maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "maskfed/fixedpoint.h"

#include <cmath>
#include <string>

#include "maskfed/errors.h"
#include "maskfed/kernels.h"

namespace maskfed {

bool TryEncode(double x, FixedWord* out) noexcept {
  if (!std::isfinite(x) || std::fabs(x) >= kEncodeLimit) return false;
  // Scaling by a power of two is exact, as is y - floor(y) below 2^63.
  const double y = x * kFixedScale;
  double r = std::floor(y);
  const double frac = y - r;
  if (frac > 0.5 || (frac == 0.5 && std::fmod(r, 2.0) != 0.0)) r += 1.0;
  *out = FixedWord(static_cast<int64_t>(r));
  return true;
}

FixedWord Encode(double x) {
  FixedWord w;
  if (TryEncode(x, &w)) return w;
  if (!std::isfinite(x)) throw DomainError("cannot encode non-finite value");
  throw RangeError("value " + std::to_string(x) +
                   " outside encodable range |x| < 2^39");
}

double Decode(FixedWord w) { return static_cast<double>(w.raw()) / kFixedScale; }

FixedModel EncodeModel(const ModelVector& m) {
  FixedModel out;
  out.layers.reserve(m.layers.size());
  for (const auto& layer : m.layers) {
    Layer<FixedWord> fixed{layer.name, std::vector<FixedWord>(layer.values.size())};
    const size_t bad = kernels::parallel::EncodeValues(layer.values, fixed.values);
    if (bad != kernels::kNoError) {
      const std::string where =
          " (layer '" + layer.name + "', index " + std::to_string(bad) + ")";
      const double x = layer.values[bad];
      if (!std::isfinite(x)) throw DomainError("non-finite parameter" + where);
      throw RangeError("parameter " + std::to_string(x) +
                       " outside |x| < 2^39" + where);
    }
    out.layers.push_back(std::move(fixed));
  }
  return out;
}

ModelVector DecodeModel(const FixedModel& m) {
  ModelVector out;
  out.layers.reserve(m.layers.size());
  for (const auto& layer : m.layers) {
    Layer<double> real{layer.name, std::vector<double>(layer.values.size())};
    kernels::parallel::DecodeValues(layer.values, real.values);
    out.layers.push_back(std::move(real));
  }
  return out;
}

FixedModel WrappingAdd(const FixedModel& a, const FixedModel& b) {
  CheckSchema(a.Schema(), b.Schema(), "WrappingAdd");
  FixedModel out = a;
  for (size_t l = 0; l < out.layers.size(); ++l) {
    kernels::parallel::AddWrapping(out.layers[l].values, b.layers[l].values);
  }
  return out;
}

FixedModel WrappingSub(const FixedModel& a, const FixedModel& b) {
  return WrappingAdd(a, Negate(b));
}

FixedModel Negate(const FixedModel& m) {
  FixedModel out = m;
  for (auto& layer : out.layers) {
    for (auto& w : layer.values) w = -w;
  }
  return out;
}

ModelVector Quantize(const ModelVector& m) { return DecodeModel(EncodeModel(m)); }

}  // namespace maskfed
