// Command-line front end: train models, evaluate perplexity, count
// parameters, and run the correlation analyses. Every run is fully
// determined by the config file plus its seed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lsrc/analysis.hpp"
#include "lsrc/checkpoint.hpp"
#include "lsrc/data.hpp"
#include "lsrc/run_config.hpp"
#include "lsrc/train.hpp"

namespace {

using namespace lsrc;

std::vector<int> parse_distances(const std::string& spec) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const std::string item =
        detail::trim(spec.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (!item.empty()) {
      try {
        out.push_back(std::stoi(item));
      } catch (...) {
        throw UsageError("bad distance value: " + item);
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw UsageError("no distances given");
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const std::string item =
        detail::trim(spec.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (!item.empty()) {
      const auto colon = item.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
        throw UsageError("bad pair (want w1:w2): " + item);
      out.emplace_back(detail::trim(item.substr(0, colon)),
                       detail::trim(item.substr(colon + 1)));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw UsageError("no pairs given");
  return out;
}

Vocab load_or_build_vocab(const RunConfig& rc) {
  if (rc.vocab_path.empty()) throw UsageError("config: no vocab path given");
  if (std::filesystem::exists(rc.vocab_path)) return load_vocab(rc.vocab_path);
  require_readable(rc.train_path, "train corpus");
  Vocab v = build_vocab(rc.train_path, rc.model.vocab_size);
  save_vocab(v, rc.vocab_path);
  return v;
}

void check_vocab_size(const Vocab& v, std::int64_t expected, const std::string& where) {
  if (v.size() != expected)
    throw UsageError(where + ": vocabulary has " + std::to_string(v.size()) +
                     " tokens but vocab_size is " + std::to_string(expected) +
                     "; set vocab_size to match");
}

TokenId require_word(const Vocab& v, const std::string& word) {
  auto it = v.id_of.find(word);
  if (it == v.id_of.end()) throw UsageError("word not in vocabulary: " + word);
  return it->second;
}

StateKind parse_state_kind(const std::string& s) {
  if (s == "H") return StateKind::h;
  if (s == "H_l") return StateKind::h_local;
  if (s == "H_g") return StateKind::h_global;
  if (s == "C") return StateKind::cell;
  throw UsageError("unknown state '" + s + "' (want H, H_l, H_g or C)");
}

void cmd_train(const std::string& config_path) {
  RunConfig rc = load_run_config(config_path);
  require_readable(rc.train_path, "train corpus");
  require_readable(rc.valid_path, "valid corpus");
  if (rc.checkpoint_path.empty()) throw UsageError("config: no checkpoint path given");

  Vocab vocab = load_or_build_vocab(rc);
  check_vocab_size(vocab, rc.model.vocab_size, "train");

  const std::vector<TokenId> train_ids = encode_file(rc.train_path, vocab);
  const std::vector<TokenId> valid_ids = encode_file(rc.valid_path, vocab);
  BatchedCorpus corpus = make_streams(train_ids, rc.train.batch_size);

  ModelParams params = init_params(rc.model, rc.train.seed);
  OptState opt = make_opt_state(rc.model, rc.train);

  std::printf("# epoch\ttrain_ppl\tvalid_ppl\tlr\n");
  run_training(params, opt, corpus, valid_ids, rc.train, [&](const EpochStats& st) {
    std::printf("%lld\t%.4f\t%.4f\t%g\n", static_cast<long long>(st.epoch),
                std::exp(st.train_ce), std::exp(-st.valid_loglik), st.lr);
    std::fflush(stdout);
    if (st.improved_best) save_checkpoint(params, rc.checkpoint_path);
  });
}

void cmd_eval(const std::string& config_path, std::string checkpoint_path,
              std::string corpus_path) {
  RunConfig rc = load_run_config(config_path);
  if (checkpoint_path.empty()) checkpoint_path = rc.checkpoint_path;
  if (corpus_path.empty()) corpus_path = rc.test_path;
  require_readable(checkpoint_path, "checkpoint");
  require_readable(corpus_path, "corpus");
  require_readable(rc.vocab_path, "vocab");

  Vocab vocab = load_vocab(rc.vocab_path);
  ModelParams params = load_checkpoint(checkpoint_path);
  check_vocab_size(vocab, params.config.vocab_size, "eval");

  const std::vector<TokenId> ids = encode_file(corpus_path, vocab);
  std::printf("%.2f\n", perplexity(params, ids));
}

void cmd_params(const std::string& config_path) {
  RunConfig rc = load_run_config(config_path);
  std::printf("%lld\n", static_cast<long long>(count_params(rc.model)));
}

void cmd_analyze_hidden(const std::string& config_path, std::string checkpoint_path,
                        std::string corpus_path, const std::string& distances_spec,
                        const std::string& state_spec, const std::string& out_path) {
  RunConfig rc = load_run_config(config_path);
  if (checkpoint_path.empty()) checkpoint_path = rc.checkpoint_path;
  if (corpus_path.empty()) corpus_path = rc.test_path;
  require_readable(checkpoint_path, "checkpoint");
  require_readable(corpus_path, "corpus");

  Vocab vocab = load_or_build_vocab(rc);
  ModelParams params = load_checkpoint(checkpoint_path);
  check_vocab_size(vocab, params.config.vocab_size, "analyze");

  const std::vector<TokenId> ids = encode_file(corpus_path, vocab);
  CorrelationCurve curve = temporal_correlation(params, ids, parse_distances(distances_spec),
                                                parse_state_kind(state_spec));
  emit_curve(curve, out_path);
  std::printf("%s\n", out_path.c_str());
}

void cmd_analyze_triggers(const std::string& config_path, std::string corpus_path,
                          const std::string& pairs_spec, const std::string& distances_spec,
                          const std::string& out_path) {
  RunConfig rc = load_run_config(config_path);
  if (corpus_path.empty()) corpus_path = rc.test_path;
  require_readable(corpus_path, "corpus");

  Vocab vocab = load_or_build_vocab(rc);
  const std::vector<TokenId> ids = encode_file(corpus_path, vocab);
  const auto word_pairs = parse_pairs(pairs_spec);
  const auto distances = parse_distances(distances_spec);

  std::vector<std::pair<TokenId, TokenId>> id_pairs;
  for (const auto& [w1, w2] : word_pairs)
    id_pairs.emplace_back(require_word(vocab, w1), require_word(vocab, w2));

  const auto curves = trigger_correlation(ids, id_pairs, distances);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    std::string path = out_path;
    if (curves.size() > 1) {
      const std::filesystem::path p(out_path);
      std::filesystem::path named = p.parent_path() / p.stem();
      named += "." + word_pairs[i].first + "_" + word_pairs[i].second;
      named += p.extension();
      path = named.string();
    }
    emit_curve(curves[i], path);
    std::printf("%s\n", path.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent language-model toolkit: rnn, lstm and lsrc cells"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, corpus_path, out_path;
  std::string pairs_spec, state_spec = "H";
  std::string distances_spec = "1,2,5,10,20,50,100";

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "run config file")->required();

  auto* eval = app.add_subcommand("eval", "print test perplexity of a checkpoint");
  eval->add_option("--config", config_path, "run config file (supplies the vocab)")
      ->required();
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint (default: config value)");
  eval->add_option("--corpus", corpus_path, "corpus to score (default: config test path)");

  auto* params_cmd = app.add_subcommand("params", "print the trainable parameter count");
  params_cmd->add_option("--config", config_path, "run config file")->required();

  auto* analyze = app.add_subcommand("analyze", "correlation diagnostics");
  analyze->require_subcommand(1);
  auto* hidden = analyze->add_subcommand("hidden-corr", "temporal correlation of a state");
  hidden->add_option("--config", config_path, "run config file")->required();
  hidden->add_option("--checkpoint", checkpoint_path, "checkpoint (default: config value)");
  hidden->add_option("--corpus", corpus_path, "corpus (default: config test path)");
  hidden->add_option("--distances", distances_spec, "comma-separated distances");
  hidden->add_option("--state", state_spec, "state to track: H, H_l, H_g or C");
  hidden->add_option("--out", out_path, "output TSV path")->required();

  auto* triggers = analyze->add_subcommand("triggers", "word trigger correlation");
  triggers->add_option("--config", config_path, "run config file (supplies the vocab)")
      ->required();
  triggers->add_option("--corpus", corpus_path, "corpus (default: config test path)");
  triggers->add_option("--pairs", pairs_spec, "word pairs w1:w2,...")->required();
  triggers->add_option("--distances", distances_spec, "comma-separated distances >= 1");
  triggers->add_option("--out", out_path, "output TSV path")->required();

  train->callback([&] { cmd_train(config_path); });
  eval->callback([&] { cmd_eval(config_path, checkpoint_path, corpus_path); });
  params_cmd->callback([&] { cmd_params(config_path); });
  hidden->callback([&] {
    cmd_analyze_hidden(config_path, checkpoint_path, corpus_path, distances_spec,
                       state_spec, out_path);
  });
  triggers->callback([&] {
    cmd_analyze_triggers(config_path, corpus_path, pairs_spec, distances_spec, out_path);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const lsrc::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
