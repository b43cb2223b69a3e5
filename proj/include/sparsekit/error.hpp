// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sparsekit {

/// Base class for all sparsekit errors.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two objects disagree on vocabulary dimension.
class dimension_error : public error {
 public:
  using error::error;
};

/// Malformed or inconsistent input data.
class input_error : public error {
 public:
  using error::error;
};

/// Invalid configuration value or flag combination.
class config_error : public error {
 public:
  using error::error;
};

/// Text input that fails to parse; carries the 1-based line number.
class parse_error : public error {
 public:
  parse_error(const std::string& what, std::size_t line)
      : error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Metric requested over an empty query universe.
class undefined_metric_error : public error {
 public:
  using error::error;
};

/// Training aborted on a non-finite loss; carries the step index.
class divergence_error : public error {
 public:
  divergence_error(const std::string& what, std::size_t step)
      : error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Index file does not start with the expected magic bytes.
class index_format_error : public error {
 public:
  using error::error;
};

/// Index file carries an unsupported format version.
class index_version_error : public error {
 public:
  using error::error;
};

/// Index file ends before the declared payload does.
class index_truncation_error : public error {
 public:
  using error::error;
};

/// Index file checksum does not match its payload.
class index_checksum_error : public error {
 public:
  using error::error;
};

/// Filesystem-level failure (open/read/write).
class io_error : public error {
 public:
  using error::error;
};

}  // namespace sparsekit
