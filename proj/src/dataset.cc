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

#include "maskfed/dataset.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace maskfed {
namespace {

std::vector<std::string> SplitComma(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& s, size_t line) {
  double v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

void AppendDouble(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

Dataset::Dataset(size_t dim, std::vector<std::string> attribute_names)
    : dim_(dim), attribute_names_(std::move(attribute_names)) {}

void Dataset::AddRow(std::span<const double> features, uint8_t label,
                     std::span<const double> attributes) {
  if (features.size() != dim_ || attributes.size() != attribute_names_.size()) {
    throw std::invalid_argument("row shape does not match dataset");
  }
  if (label > 1) throw std::invalid_argument("labels must be 0 or 1");
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
  attributes_.insert(attributes_.end(), attributes.begin(), attributes.end());
}

bool Dataset::HasAttribute(const std::string& name) const {
  return std::find(attribute_names_.begin(), attribute_names_.end(), name) !=
         attribute_names_.end();
}

size_t Dataset::AttributeIndex(const std::string& name) const {
  auto it = std::find(attribute_names_.begin(), attribute_names_.end(), name);
  if (it == attribute_names_.end()) throw std::out_of_range("no attribute '" + name + "'");
  return static_cast<size_t>(it - attribute_names_.begin());
}

double Dataset::Attribute(size_t row, const std::string& name) const {
  return attributes_[row * attribute_names_.size() + AttributeIndex(name)];
}

Dataset Dataset::Subset(std::span<const size_t> indices) const {
  Dataset out(dim_, attribute_names_);
  const size_t na = attribute_names_.size();
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  out.attributes_.reserve(indices.size() * na);
  for (size_t r : indices) {
    if (r >= rows()) throw std::out_of_range("row index " + std::to_string(r));
    auto f = Features(r);
    out.features_.insert(out.features_.end(), f.begin(), f.end());
    out.labels_.push_back(labels_[r]);
    auto a = std::span(attributes_).subspan(r * na, na);
    out.attributes_.insert(out.attributes_.end(), a.begin(), a.end());
  }
  return out;
}

void WriteCsv(const Dataset& data, std::ostream& out) {
  std::string line;
  for (size_t j = 0; j < data.dim(); ++j) line += "f" + std::to_string(j) + ",";
  line += "label";
  for (const auto& a : data.attribute_names()) line += "," + a;
  out << line << '\n';
  for (size_t r = 0; r < data.rows(); ++r) {
    line.clear();
    for (double v : data.Features(r)) {
      AppendDouble(line, v);
      line += ',';
    }
    line += data.Label(r) ? '1' : '0';
    for (const auto& a : data.attribute_names()) {
      line += ',';
      AppendDouble(line, data.Attribute(r, a));
    }
    out << line << '\n';
  }
}

void WriteCsvFile(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  WriteCsv(data, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset ReadCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = SplitComma(line);
  size_t dim = 0;
  while (dim < header.size() && header[dim] == "f" + std::to_string(dim)) ++dim;
  if (dim == header.size() || header[dim] != "label") {
    throw std::runtime_error("CSV header must be f0..f{d-1},label[,attributes]");
  }
  std::vector<std::string> attrs(header.begin() + static_cast<ptrdiff_t>(dim) + 1,
                                 header.end());
  Dataset data(dim, attrs);
  std::vector<double> features(dim), attributes(attrs.size());
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = SplitComma(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " columns");
    }
    for (size_t j = 0; j < dim; ++j) features[j] = ParseDouble(cells[j], line_no);
    const double label = ParseDouble(cells[dim], line_no);
    if (label != 0.0 && label != 1.0) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    for (size_t a = 0; a < attrs.size(); ++a) {
      attributes[a] = ParseDouble(cells[dim + 1 + a], line_no);
    }
    data.AddRow(features, static_cast<uint8_t>(label), attributes);
  }
  return data;
}

Dataset ReadCsvFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ReadCsv(in);
}

}  // namespace maskfed
