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

#ifndef MASKFED_MODEL_H_
#define MASKFED_MODEL_H_

#include <cstddef>
#include <string>
#include <vector>

namespace maskfed {

// Name and length of one layer; a session's schema is the ordered list.
struct LayerSpec {
  std::string name;
  size_t size = 0;

  bool operator==(const LayerSpec&) const = default;
};

using ModelSchema = std::vector<LayerSpec>;

size_t TotalParameters(const ModelSchema& schema);

// A flat parameter sequence with a name.
template <typename T>
struct Layer {
  std::string name;
  std::vector<T> values;

  bool operator==(const Layer&) const = default;
};

// Ordered named layers. Used both for real-valued models and for their
// fixed-point encodings.
template <typename T>
struct LayeredModel {
  std::vector<Layer<T>> layers;

  bool operator==(const LayeredModel&) const = default;

  ModelSchema Schema() const {
    ModelSchema schema;
    schema.reserve(layers.size());
    for (const auto& l : layers) schema.push_back({l.name, l.values.size()});
    return schema;
  }

  size_t ParameterCount() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.values.size();
    return n;
  }

  static LayeredModel Zeros(const ModelSchema& schema) {
    LayeredModel m;
    m.layers.reserve(schema.size());
    for (const auto& s : schema) m.layers.push_back({s.name, std::vector<T>(s.size)});
    return m;
  }
};

using ModelVector = LayeredModel<double>;

// Throws SchemaMismatch with `context` when the schemas differ.
void CheckSchema(const ModelSchema& expected, const ModelSchema& actual,
                 const std::string& context);

}  // namespace maskfed

#endif  // MASKFED_MODEL_H_
