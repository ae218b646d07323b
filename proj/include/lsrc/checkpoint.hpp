#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "lsrc/model.hpp"

// Versioned binary checkpoint, little-endian throughout:
//
//   offset 0   magic "LSRC" (4 bytes)
//   offset 4   u32 format version (= 1)
//   offset 8   u32 arch (0 = rnn, 1 = lstm, 2 = lsrc)
//   offset 12  u64 vocab_size, u64 embed_size, u64 hidden_size, u64 dense_size
//              (dense_size 0 means no dense layer)
//   offset 44  one record per matrix in canonical order (see matrix_list):
//              u64 rows, u64 cols, then rows*cols f64 values row-major
//
// Total size is 44 + 16 * n_matrices + 8 * count_params(config) bytes.
// A round trip reproduces every matrix bitwise.

namespace lsrc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format requires a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'L', 'S', 'R', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 44;

inline std::uint64_t checkpoint_byte_size(const ModelConfig& c) {
  ModelParams shape = zeros_like(c);
  const std::uint64_t n_matrices = matrix_list(shape).size();
  return kCheckpointHeaderBytes + 16 * n_matrices +
         8 * static_cast<std::uint64_t>(count_params(c));
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

struct Reader {
  std::istream& is;
  std::uint64_t offset = 0;

  void read_raw(void* dst, std::size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw FormatError("checkpoint: truncated while reading " + std::string(what) +
                        " at offset " + std::to_string(offset));
    offset += n;
  }
  std::uint32_t read_u32(const char* what) {
    std::uint32_t v;
    read_raw(&v, sizeof(v), what);
    return v;
  }
  std::uint64_t read_u64(const char* what) {
    std::uint64_t v;
    read_raw(&v, sizeof(v), what);
    return v;
  }
};

}  // namespace detail

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);

  os.write(kCheckpointMagic, 4);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(params.config.arch));
  detail::write_u64(os, static_cast<std::uint64_t>(params.config.vocab_size));
  detail::write_u64(os, static_cast<std::uint64_t>(params.config.embed_size));
  detail::write_u64(os, static_cast<std::uint64_t>(params.config.hidden_size));
  detail::write_u64(os, static_cast<std::uint64_t>(params.config.dense_size));

  for (const auto& nm : matrix_list(params)) {
    const Matrix& m = *nm.matrix;
    detail::write_u64(os, m.rows);
    detail::write_u64(os, m.cols);
    os.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  }
  if (!os) throw IoError("write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  detail::Reader r{is};

  char magic[4];
  r.read_raw(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic at offset 0 in " + path);
  const std::uint32_t version = r.read_u32("version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      " at offset 4");

  const std::uint32_t arch_raw = r.read_u32("arch");
  if (arch_raw > 2)
    throw FormatError("checkpoint: unknown arch tag " + std::to_string(arch_raw) +
                      " at offset 8");
  ModelConfig config;
  config.arch = static_cast<Arch>(arch_raw);
  config.vocab_size = static_cast<std::int64_t>(r.read_u64("vocab_size"));
  config.embed_size = static_cast<std::int64_t>(r.read_u64("embed_size"));
  config.hidden_size = static_cast<std::int64_t>(r.read_u64("hidden_size"));
  config.dense_size = static_cast<std::int64_t>(r.read_u64("dense_size"));
  try {
    config.validate();
  } catch (const UsageError& e) {
    throw FormatError("checkpoint: invalid config in header: " + std::string(e.what()));
  }

  ModelParams params = zeros_like(config);
  for (auto& nm : matrix_list(params)) {
    Matrix& m = *nm.matrix;
    const std::uint64_t record_at = r.offset;
    const std::uint64_t rows = r.read_u64("matrix rows");
    const std::uint64_t cols = r.read_u64("matrix cols");
    if (rows != m.rows || cols != m.cols)
      throw FormatError("checkpoint: matrix " + nm.name + " has shape (" +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        "), expected " + shape_str(m) + " at offset " +
                        std::to_string(record_at));
    r.read_raw(m.data.data(), m.data.size() * sizeof(double), nm.name.c_str());
  }
  // Exactly at end of file?
  char extra;
  is.read(&extra, 1);
  if (is.gcount() != 0)
    throw FormatError("checkpoint: trailing bytes at offset " + std::to_string(r.offset));
  return params;
}

}  // namespace lsrc
