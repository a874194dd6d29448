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

#ifndef MASKFED_DATASET_H_
#define MASKFED_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace maskfed {

// Dense binary-classification table: `dim` features per row, a 0/1 label
// and named real-valued attributes (e.g. "age") that never feed the model.
class Dataset {
 public:
  Dataset() = default;
  Dataset(size_t dim, std::vector<std::string> attribute_names);

  size_t dim() const { return dim_; }
  size_t rows() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::vector<std::string>& attribute_names() const { return attribute_names_; }

  void AddRow(std::span<const double> features, uint8_t label,
              std::span<const double> attributes);

  std::span<const double> features() const { return features_; }
  std::span<const double> Features(size_t row) const {
    return std::span(features_).subspan(row * dim_, dim_);
  }
  uint8_t Label(size_t row) const { return labels_[row]; }
  std::span<const uint8_t> labels() const { return labels_; }

  bool HasAttribute(const std::string& name) const;
  // Throws std::out_of_range for an unknown attribute.
  double Attribute(size_t row, const std::string& name) const;

  // Rows in the given order.
  Dataset Subset(std::span<const size_t> indices) const;

 private:
  size_t AttributeIndex(const std::string& name) const;

  size_t dim_ = 0;
  std::vector<std::string> attribute_names_;
  std::vector<double> features_;
  std::vector<uint8_t> labels_;
  std::vector<double> attributes_;
};

// CSV with header: f0..f{d-1}, label, then attribute columns. Values use the
// shortest round-trip decimal form, so export is byte-deterministic.
void WriteCsv(const Dataset& data, std::ostream& out);
void WriteCsvFile(const Dataset& data, const std::string& path);
// Throws std::runtime_error describing the first bad line.
Dataset ReadCsv(std::istream& in);
Dataset ReadCsvFile(const std::string& path);

}  // namespace maskfed

#endif  // MASKFED_DATASET_H_
