// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/data.hpp"

#include <string>
#include <vector>

namespace rankformer {

/// Raised by read_dataset with the offending line number and field.
class DatasetFormatError : public std::runtime_error {
 public:
  DatasetFormatError(size_t line, const std::string& field, const std::string& what)
      : std::runtime_error("dataset line " + std::to_string(line) + ", field '" +
                           field + "': " + what),
        line_(line),
        field_(field) {}
  size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  size_t line_;
  std::string field_;
};

/// Newline-delimited records, one request per line, preceded by a schema
/// version header line. See docs/dataset_format.md.
void write_dataset(const std::vector<RequestSample>& samples, const std::string& path);

/// Reads and validates a dataset written by write_dataset. Enforces the
/// label funnel (cart/purchase imply click) and history timestamp order.
std::vector<RequestSample> read_dataset(const std::string& path);

}  // namespace rankformer
