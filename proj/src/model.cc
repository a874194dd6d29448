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

#include "maskfed/model.h"

#include "maskfed/errors.h"

namespace maskfed {

size_t TotalParameters(const ModelSchema& schema) {
  size_t n = 0;
  for (const auto& s : schema) n += s.size;
  return n;
}

void CheckSchema(const ModelSchema& expected, const ModelSchema& actual,
                 const std::string& context) {
  if (expected.size() != actual.size()) {
    throw SchemaMismatch(context + ": expected " +
                         std::to_string(expected.size()) + " layers, got " +
                         std::to_string(actual.size()));
  }
  for (size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] != actual[i]) {
      throw SchemaMismatch(context + ": layer " + std::to_string(i) +
                           " is (" + actual[i].name + ", " +
                           std::to_string(actual[i].size) + "), expected (" +
                           expected[i].name + ", " +
                           std::to_string(expected[i].size) + ")");
    }
  }
}

}  // namespace maskfed
