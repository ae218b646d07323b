#include <catch2/catch_amalgamated.hpp>

#include "lsrc/analysis.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "helpers.hpp"

using namespace lsrc;
using testutil::TempDir;

namespace {

std::vector<TokenId> random_ids(std::size_t n, std::int64_t vocab, std::mt19937_64& rng) {
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = static_cast<TokenId>(rng() % vocab);
  return ids;
}

}  // namespace

TEST_CASE("perplexity") {
  std::mt19937_64 rng(101);

  SECTION("zero-weight model scores exactly the vocabulary size") {
    const ModelConfig c{Arch::lsrc, 10, 3, 4, 0};
    ModelParams p = zeros_like(c);
    const auto ids = random_ids(500, c.vocab_size, rng);
    CHECK(std::abs(perplexity(p, ids) - 10.0) < 1e-9);
  }

  SECTION("matches an independent two-pass loop") {
    const ModelConfig c{Arch::lstm, 7, 2, 3, 0};
    ModelParams p = init_params(c, 55);
    const auto ids = random_ids(120, c.vocab_size, rng);

    // pass 1: count predictions; pass 2: accumulate log-probabilities by
    // stepping the cell and output layer directly
    const std::size_t predictions = ids.size() - 1;
    double log_sum = 0.0;
    LstmState state{Matrix(1, 3), Matrix(1, 3)};
    const auto& cell = std::get<LstmParams>(p.cell);
    for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
      const TokenId in[] = {ids[t]};
      Matrix x = embed_lookup(p.embedding, in);
      state = lstm_step(cell, x, state);
      Matrix probs = output_step(p.output, state.h);
      log_sum += std::log(probs.at(0, static_cast<std::size_t>(ids[t + 1])));
    }
    const double expect = std::exp(-log_sum / double(predictions));
    CHECK(perplexity(p, ids) == Catch::Approx(expect).epsilon(1e-12));
  }

  SECTION("chunk boundaries do not change the result") {
    const ModelConfig c{Arch::rnn, 6, 3, 3, 0};
    ModelParams p = init_params(c, 9);
    const auto ids = random_ids(700, c.vocab_size, rng);
    CHECK(sequence_mean_nll(p, ids, 256) ==
          Catch::Approx(sequence_mean_nll(p, ids, 17)).epsilon(1e-13));
  }

  SECTION("fewer than two tokens is a usage error") {
    const ModelConfig c{Arch::rnn, 4, 2, 2, 0};
    ModelParams p = zeros_like(c);
    std::vector<TokenId> one = {2};
    CHECK_THROWS_AS(perplexity(p, one), UsageError);
  }
}

TEST_CASE("temporal_correlation") {
  std::mt19937_64 rng(103);

  SECTION("constant nonzero state gives 1 at every distance") {
    // zero recurrence + a constant token keeps H_t = tanh(x) fixed
    const ModelConfig c{Arch::rnn, 3, 2, 2, 0};
    ModelParams p = zeros_like(c);
    p.embedding.at(1, 0) = 0.7;
    p.embedding.at(1, 1) = -0.4;
    std::vector<TokenId> ids(50, 1);
    CorrelationCurve curve = temporal_correlation(p, ids, {0, 1, 5, 20}, StateKind::h);
    for (double v : curve.values) CHECK(v == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("distance zero is exactly self-similarity") {
    const ModelConfig c{Arch::lstm, 5, 2, 3, 0};
    ModelParams p = init_params(c, 77);
    const auto ids = random_ids(40, c.vocab_size, rng);
    CorrelationCurve curve = temporal_correlation(p, ids, {0}, StateKind::h);
    CHECK(curve.values[0] == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("matches a brute-force double loop") {
    const ModelConfig c{Arch::lsrc, 6, 2, 3, 0};
    ModelParams p = init_params(c, 31);
    const auto ids = random_ids(60, c.vocab_size, rng);
    const std::vector<int> distances = {0, 1, 3, 9};

    for (StateKind kind : {StateKind::h_local, StateKind::h_global, StateKind::cell}) {
      // record every state by stepping the cell directly
      std::vector<std::vector<double>> states;
      LsrcState st{Matrix(1, 2), Matrix(1, 3), Matrix(1, 3)};
      const auto& cell = std::get<LsrcParams>(p.cell);
      for (TokenId id : ids) {
        const TokenId in[] = {id};
        st = lsrc_step(cell, embed_lookup(p.embedding, in), st);
        const Matrix& m = kind == StateKind::h_local   ? st.h_local
                          : kind == StateKind::h_global ? st.h_global
                                                        : st.c;
        states.push_back(m.data);
      }
      auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          dot += a[i] * b[i];
          na += a[i] * a[i];
          nb += b[i] * b[i];
        }
        if (na == 0.0 || nb == 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
      };

      CorrelationCurve got = temporal_correlation(p, ids, distances, kind);
      for (std::size_t k = 0; k < distances.size(); ++k) {
        const auto d = static_cast<std::size_t>(distances[k]);
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t t = 0; t + d < states.size(); ++t) {
          sum += cosine(states[t], states[t + d]);
          ++cnt;
        }
        CHECK(got.values[k] == Catch::Approx(sum / double(cnt)).margin(1e-12));
      }
    }
  }

  SECTION("values stay within [-1, 1]") {
    const ModelConfig c{Arch::lstm, 8, 3, 4, 0};
    ModelParams p = init_params(c, 5);
    const auto ids = random_ids(80, c.vocab_size, rng);
    CorrelationCurve curve =
        temporal_correlation(p, ids, {1, 2, 4, 8, 16, 32}, StateKind::cell);
    for (double v : curve.values) {
      CHECK(v <= 1.0 + 1e-12);
      CHECK(v >= -1.0 - 1e-12);
    }
  }

  SECTION("distance beyond the sequence is a usage error") {
    const ModelConfig c{Arch::rnn, 4, 2, 2, 0};
    ModelParams p = zeros_like(c);
    std::vector<TokenId> ids(10, 1);
    CHECK_THROWS_AS(temporal_correlation(p, ids, {10}, StateKind::h), UsageError);
  }

  SECTION("state kinds are validated against the architecture") {
    const ModelConfig c{Arch::rnn, 4, 2, 2, 0};
    ModelParams p = zeros_like(c);
    std::vector<TokenId> ids(10, 1);
    CHECK_THROWS_AS(temporal_correlation(p, ids, {1}, StateKind::h_global), UsageError);
    CHECK_THROWS_AS(temporal_correlation(p, ids, {1}, StateKind::cell), UsageError);
  }
}

TEST_CASE("trigger_correlation") {
  SECTION("constructed (a b) x 1000 corpus") {
    std::vector<TokenId> ids;
    for (int k = 0; k < 1000; ++k) {
      ids.push_back(0);  // a
      ids.push_back(1);  // b
    }
    auto curves = trigger_correlation(ids, {{0, 1}, {0, 0}}, {1});
    // joint(a,b; d=1) = 1000 over 1999 positions, P(a) = P(b) = 1/2
    const double expect = (1000.0 / 1999.0) / 0.25;
    CHECK(curves[0].values[0] == Catch::Approx(expect).margin(1e-9));
    CHECK(expect == Catch::Approx(4000.0 / 1999.0).margin(1e-15));
    // adjacent (a,a) never happens in this construction
    CHECK(curves[1].values[0] == 0.0);
  }

  SECTION("iid uniform corpus stays within three standard errors of 1") {
    std::mt19937_64 rng(20260810);  // documented seed
    const std::int64_t vocab = 8;
    const std::size_t n = 100000;
    auto ids = random_ids(n, vocab, rng);
    TriggerStats stats = build_trigger_stats(ids);
    const std::vector<int> distances = {1, 2, 5, 10, 50, 100};
    const std::vector<std::pair<TokenId, TokenId>> pairs = {{0, 1}, {3, 3}, {5, 2}};
    for (const auto& [w1, w2] : pairs) {
      auto curve = trigger_correlation_pair(ids, stats, w1, w2, distances);
      const double p12 = stats.prob(w1) * stats.prob(w2);
      for (std::size_t k = 0; k < distances.size(); ++k) {
        const double se =
            std::sqrt((1.0 - p12) / (p12 * double(n - std::size_t(distances[k]))));
        INFO("pair (" << w1 << "," << w2 << ") d=" << distances[k]);
        CHECK(std::abs(curve.values[k] - 1.0) <= 3.0 * se);
      }
    }
  }

  SECTION("zero unigram probability is an error") {
    std::vector<TokenId> ids = {0, 1, 0, 1};
    TriggerStats stats = build_trigger_stats(ids);
    CHECK_THROWS_AS(trigger_correlation_pair(ids, stats, 0, 1, {5}), UsageError);
    std::vector<TokenId> with_gap = {0, 2, 0, 2};  // token 1 never occurs
    TriggerStats s2 = build_trigger_stats(with_gap);
    CHECK_THROWS_AS(trigger_correlation_pair(with_gap, s2, 0, 1, {1}), UsageError);
  }
}

TEST_CASE("emit_curve") {
  TempDir tmp;
  CorrelationCurve curve;
  curve.distances = {1, 5, 10};
  curve.values = {1.2345678901234567, -0.5, 0.000123456789012345};
  const std::string path = tmp.file("curve.tsv");
  emit_curve(curve, path);

  const std::string text = testutil::read_text(path);
  std::istringstream is(text);
  std::string header;
  std::getline(is, header);
  CHECK(header == "# d\tvalue");

  int rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    REQUIRE(!line.empty());
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const int d = std::stoi(line.substr(0, tab));
    const double v = std::stod(line.substr(tab + 1));
    CHECK(d == curve.distances[std::size_t(rows)]);
    // round trip to at least 12 significant digits
    const double expect = curve.values[std::size_t(rows)];
    CHECK(std::abs(v - expect) <= std::abs(expect) * 1e-12);
    ++rows;
  }
  CHECK(rows == 3);
}
