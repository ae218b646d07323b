#include <catch2/catch_amalgamated.hpp>

#include "lsrc/checkpoint.hpp"
#include "lsrc/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"

using namespace lsrc;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::TempDir;

namespace {

ModelConfig cfg(Arch arch, std::int64_t v, std::int64_t e, std::int64_t h,
                std::int64_t d = 0) {
  return ModelConfig{arch, v, e, h, d};
}

bool params_bitwise_equal(const ModelParams& a, const ModelParams& b) {
  auto la = matrix_list(a);
  auto lb = matrix_list(b);
  if (la.size() != lb.size()) return false;
  for (std::size_t i = 0; i < la.size(); ++i)
    if (!bitwise_equal(*la[i].matrix, *lb[i].matrix)) return false;
  return true;
}

TokenMatrix random_tokens(std::size_t batch, std::size_t steps, std::int64_t vocab,
                          std::mt19937_64& rng) {
  TokenMatrix t(batch, steps);
  for (auto& id : t.ids) id = static_cast<TokenId>(rng() % vocab);
  return t;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(cfg(Arch::rnn, 10, 4, 5).validate(), UsageError);  // rnn needs E == H
  CHECK_NOTHROW(cfg(Arch::rnn, 10, 4, 4).validate());
  CHECK_THROWS_AS(cfg(Arch::lstm, 0, 4, 4).validate(), UsageError);
  CHECK_THROWS_AS(cfg(Arch::lsrc, 10, 0, 4).validate(), UsageError);
  CHECK_NOTHROW(cfg(Arch::lsrc, 10, 3, 4, 6).validate());
}

TEST_CASE("init_params") {
  const ModelConfig c = cfg(Arch::lsrc, 20, 6, 8, 5);

  SECTION("same seed gives identical parameters") {
    CHECK(params_bitwise_equal(init_params(c, 99), init_params(c, 99)));
  }

  SECTION("values stay within the Glorot bound") {
    ModelParams p = init_params(c, 7);
    for (const auto& nm : matrix_list(p)) {
      const double limit = std::sqrt(6.0 / double(nm.matrix->rows + nm.matrix->cols));
      for (double v : nm.matrix->data) {
        CHECK(std::abs(v) <= limit);
      }
    }
  }

  SECTION("empirical mean of a large matrix is near zero") {
    // 10^4 draws: uniform(-limit, limit) has sd = limit/sqrt(3), so the
    // sample mean is within 3*sd/sqrt(n) of zero with high probability.
    ModelConfig big = cfg(Arch::rnn, 100, 100, 100);
    ModelParams p = init_params(big, 2024);
    const Matrix& m = p.embedding;  // 100x100 = 10^4 draws
    const double limit = std::sqrt(6.0 / double(m.rows + m.cols));
    double mean = 0.0;
    for (double v : m.data) mean += v;
    mean /= double(m.size());
    const double sd = limit / std::sqrt(3.0);
    CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(double(m.size())));
  }
}

TEST_CASE("count_params reproduces the published model sizes") {
  // PTB-scale configurations (vocab 10k)
  CHECK(count_params(cfg(Arch::rnn, 10000, 400, 400)) == 8160000);
  CHECK(count_params(cfg(Arch::lstm, 10000, 200, 400)) == 6960000);
  CHECK(count_params(cfg(Arch::lsrc, 10000, 100, 400)) == 5810000);
  CHECK(count_params(cfg(Arch::lsrc, 10000, 200, 400)) == 7000000);
  CHECK(count_params(cfg(Arch::lsrc, 10000, 100, 400, 400)) == 5970000);
  CHECK(count_params(cfg(Arch::lsrc, 10000, 200, 400, 400)) == 7160000);
  // LTCB-scale configurations (vocab 80k)
  CHECK(count_params(cfg(Arch::rnn, 80000, 600, 600)) == 96360000);
  CHECK(count_params(cfg(Arch::lstm, 80000, 200, 600)) == 65920000);
  CHECK(count_params(cfg(Arch::lsrc, 80000, 200, 600)) == 65960000);
  CHECK(count_params(cfg(Arch::lsrc, 80000, 200, 600, 600)) == 66320000);
}

TEST_CASE("count_params matches instantiated element totals") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const Arch arch = static_cast<Arch>(rng() % 3);
    const std::int64_t h = 1 + std::int64_t(rng() % 7);
    const std::int64_t e = arch == Arch::rnn ? h : 1 + std::int64_t(rng() % 7);
    const ModelConfig c = cfg(arch, 2 + std::int64_t(rng() % 30), e, h,
                              (rng() % 2) ? std::int64_t(rng() % 6) : 0);
    ModelParams p = zeros_like(c);
    std::int64_t total = 0;
    for (const auto& nm : matrix_list(p)) total += std::int64_t(nm.matrix->size());
    CHECK(count_params(c) == total);
  }
}

TEST_CASE("forward_sequence") {
  std::mt19937_64 rng(30);

  SECTION("zero-weight model emits uniform distributions") {
    const ModelConfig c = cfg(Arch::lstm, 12, 3, 4);
    ModelParams p = zeros_like(c);
    TokenMatrix tokens = random_tokens(2, 5, c.vocab_size, rng);
    SequenceResult res = forward_sequence(p, tokens, zero_state(c, 2), false);
    for (const auto& step : res.probs)
      for (double v : step.data) CHECK(std::abs(v - 1.0 / 12.0) < 1e-15);
  }

  SECTION("split with carried state equals the whole run") {
    for (Arch arch : {Arch::rnn, Arch::lstm, Arch::lsrc}) {
      const ModelConfig c = cfg(arch, 15, arch == Arch::rnn ? 5 : 3, 5, 0);
      ModelParams p = init_params(c, 123);
      TokenMatrix tokens = random_tokens(2, 8, c.vocab_size, rng);

      SequenceResult whole = forward_sequence(p, tokens, zero_state(c, 2), false);
      SequenceResult first =
          forward_sequence(p, tokens.slice_cols(0, 3), zero_state(c, 2), false);
      SequenceResult second =
          forward_sequence(p, tokens.slice_cols(3, 8), first.final_state, false);

      for (std::size_t t = 0; t < 5; ++t)
        CHECK(max_abs_diff(second.probs[t], whole.probs[t + 3]) < 1e-12);
    }
  }

  SECTION("single step equals cell step plus output step") {
    const ModelConfig c = cfg(Arch::lsrc, 9, 3, 4);
    ModelParams p = init_params(c, 77);
    TokenMatrix tokens = random_tokens(2, 1, c.vocab_size, rng);
    SequenceResult res = forward_sequence(p, tokens, zero_state(c, 2), false);

    std::vector<TokenId> col = {tokens.at(0, 0), tokens.at(1, 0)};
    Matrix x = embed_lookup(p.embedding, col);
    LsrcState manual = lsrc_step(std::get<LsrcParams>(p.cell), x,
                                 std::get<LsrcState>(zero_state(c, 2)));
    Matrix probs = output_step(p.output, manual.h_global);
    CHECK(bitwise_equal(res.probs[0], probs));
  }

  SECTION("causal: later tokens do not affect earlier distributions") {
    const ModelConfig c = cfg(Arch::lstm, 11, 3, 4);
    ModelParams p = init_params(c, 3);
    TokenMatrix tokens = random_tokens(1, 6, c.vocab_size, rng);
    SequenceResult base = forward_sequence(p, tokens, zero_state(c, 1), false);
    TokenMatrix altered = tokens;
    altered.at(0, 5) = (altered.at(0, 5) + 1) % c.vocab_size;
    altered.at(0, 4) = (altered.at(0, 4) + 3) % c.vocab_size;
    SequenceResult mod = forward_sequence(p, altered, zero_state(c, 1), false);
    for (std::size_t t = 0; t < 4; ++t)
      CHECK(bitwise_equal(base.probs[t], mod.probs[t]));
  }

  SECTION("dense layer feeds the output softmax") {
    const ModelConfig c = cfg(Arch::lsrc, 9, 3, 4, 6);
    ModelParams p = init_params(c, 8);
    TokenMatrix tokens = random_tokens(1, 1, c.vocab_size, rng);
    SequenceResult res = forward_sequence(p, tokens, zero_state(c, 1), false);
    std::vector<TokenId> col = {tokens.at(0, 0)};
    Matrix x = embed_lookup(p.embedding, col);
    LsrcState st = lsrc_step(std::get<LsrcParams>(p.cell), x,
                             std::get<LsrcState>(zero_state(c, 1)));
    Matrix probs = output_step(p.output, dense_relu_step(p.dense, st.h_global));
    CHECK(bitwise_equal(res.probs[0], probs));
  }
}

TEST_CASE("checkpoint") {
  TempDir tmp;
  const ModelConfig c = cfg(Arch::lsrc, 17, 4, 6, 5);

  SECTION("round trip is bitwise identical") {
    ModelParams p = init_params(c, 31);
    const std::string path = tmp.file("model.bin");
    save_checkpoint(p, path);
    ModelParams q = load_checkpoint(path);
    CHECK(q.config.arch == c.arch);
    CHECK(q.config.vocab_size == c.vocab_size);
    CHECK(q.config.dense_size == c.dense_size);
    CHECK(params_bitwise_equal(p, q));
  }

  SECTION("file length follows the format") {
    for (Arch arch : {Arch::rnn, Arch::lstm, Arch::lsrc}) {
      const ModelConfig cc = cfg(arch, 7, arch == Arch::rnn ? 3 : 2, 3);
      ModelParams p = init_params(cc, 1);
      const std::string path = tmp.file("sized.bin");
      save_checkpoint(p, path);
      const auto n_matrices = matrix_list(p).size();
      const std::uint64_t expect =
          44 + 16 * n_matrices + 8 * std::uint64_t(count_params(cc));
      CHECK(std::filesystem::file_size(path) == expect);
      CHECK(checkpoint_byte_size(cc) == expect);
    }
  }

  SECTION("truncated file reports the offset and returns nothing") {
    ModelParams p = init_params(c, 5);
    const std::string path = tmp.file("trunc.bin");
    save_checkpoint(p, path);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 13);
    CHECK_THROWS_MATCHES(
        load_checkpoint(path), FormatError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("offset")));
  }

  SECTION("bad magic") {
    const std::string path = tmp.file("magic.bin");
    testutil::write_text(path, "NOPExxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx");
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }

  SECTION("trailing bytes are rejected") {
    ModelParams p = init_params(c, 5);
    const std::string path = tmp.file("extra.bin");
    save_checkpoint(p, path);
    std::ofstream os(path, std::ios::binary | std::ios::app);
    os << "junk";
    os.close();
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
}
