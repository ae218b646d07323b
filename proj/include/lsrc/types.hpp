#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsrc {

using TokenId = std::int32_t;

// Matrix shapes do not line up for the requested operation.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A token id points outside the table it indexes.
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed checkpoint or vocabulary file.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller misuse: invalid configuration values, empty corpus, bad arguments.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File could not be read or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values showed up where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense block of token ids, row per stream, column per time step.
struct TokenMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<TokenId> ids;

  TokenMatrix() = default;
  TokenMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), ids(r * c, 0) {}

  TokenId at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
  TokenId& at(std::size_t r, std::size_t c) { return ids[r * cols + c]; }

  // Copy of columns [c0, c1).
  TokenMatrix slice_cols(std::size_t c0, std::size_t c1) const {
    TokenMatrix out(rows, c1 - c0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = at(r, c);
    return out;
  }
};

}  // namespace lsrc
