//  Copyright 2026 The l1refine Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#include "l1refine/cli.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <string_view>

#include "CLI11.hpp"
#include "json.hpp"
#include "l1refine/embed_io.hpp"
#include "l1refine/error.hpp"
#include "l1refine/eval.hpp"
#include "l1refine/formats.hpp"
#include "l1refine/pipeline.hpp"
#include "l1refine/synth.hpp"

namespace l1refine {
namespace {

// Offset between a synthetic problem's seed and the seed of its baseline
// perturbation.
constexpr std::uint64_t kBaselineSeedOffset = 1000;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool flag_given(const std::vector<std::string>& args, const std::string& flag) {
  for (const std::string& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

std::optional<std::string> config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

// Appends "--key value" for every config entry whose flag is absent from
// the command line.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  const auto path = config_path(args);
  if (!path) return args;
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + *path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + *path + " is not valid JSON: " +
                      e.what());
  }
  if (!cfg.is_object()) {
    throw ConfigError("config file " + *path + " must hold a JSON object");
  }
  std::vector<std::string> extra;
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (key == "config") throw ConfigError("config files cannot nest");
    if (flag_given(args, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back(flag);
    } else if (value.is_number_integer()) {
      extra.push_back(flag);
      extra.push_back(value.dump());
    } else if (value.is_number()) {
      extra.push_back(flag);
      extra.push_back(format_real(value.get<double>()));
    } else if (value.is_string()) {
      extra.push_back(flag);
      extra.push_back(value.get<std::string>());
    } else {
      throw ConfigError("config key '" + key +
                        "' must be a boolean, number or string");
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

RetrievalMethod parse_retrieval(const std::string& s) {
  return s == "nn" ? RetrievalMethod::kNearestNeighbour : RetrievalMethod::kCsls;
}

std::optional<std::size_t> optional_limit(std::size_t v) {
  if (v == 0) return std::nullopt;
  return v;
}

struct SolverFlags {
  SolverConfig cfg;
  std::string integrator = "rk4";
  std::string comparison = "previous";
};

void add_solver_flags(CLI::App& cmd, SolverFlags& s) {
  cmd.add_option("--alpha", s.cfg.alpha, "tanh smoothing coefficient")
      ->capture_default_str();
  cmd.add_option("--epsilon", s.cfg.epsilon,
                 "allowed max|M^T M - I| before the flow stops")
      ->capture_default_str();
  cmd.add_option("--dt", s.cfg.dt,
                 "integration step (largest step in adaptive mode)")
      ->capture_default_str();
  cmd.add_option("--budget", s.cfg.t_budget, "total integration time")
      ->capture_default_str();
  cmd.add_option("--abs-tol", s.cfg.abs_tol, "adaptive mode absolute tolerance")
      ->capture_default_str();
  cmd.add_option("--rel-tol", s.cfg.rel_tol, "adaptive mode relative tolerance")
      ->capture_default_str();
  cmd.add_option("--max-order", s.cfg.max_order,
                 "recorded only; both integrators are 4th order")
      ->capture_default_str();
  cmd.add_option("--check-stride", s.cfg.loss_check_stride,
                 "steps between stopping checks")
      ->capture_default_str();
  cmd.add_option("--integrator", s.integrator, "rk4 (fixed step) or rk4-adaptive")
      ->check(CLI::IsMember({"rk4", "rk4-adaptive"}))
      ->capture_default_str();
  cmd.add_option("--loss-comparison", s.comparison,
                 "stop when the loss exceeds the previous check or the "
                 "running minimum")
      ->check(CLI::IsMember({"previous", "running-min"}))
      ->capture_default_str();
}

SolverConfig finish_solver(const SolverFlags& s) {
  SolverConfig cfg = s.cfg;
  cfg.integrator = s.integrator == "rk4-adaptive" ? Integrator::kRk4Adaptive
                                                   : Integrator::kRk4Fixed;
  cfg.comparison = s.comparison == "running-min"
                       ? LossComparison::kRunningMinimum
                       : LossComparison::kPrevious;
  cfg.validate();
  return cfg;
}

struct RefineFlags {
  std::string src, tgt, out, report, map_out, dict_out;
  std::string loss = "l1";
  std::string retrieval = "csls";
  std::string init = "identity";
  int csls_k = kDefaultCslsK;
  std::size_t vocab_limit = 0;
  std::size_t dict_rows = 0;
  bool reverse = false;
  bool no_timing = false;
  SolverFlags solver;
};

int cmd_refine(const RefineFlags& f, std::ostream& out) {
  const SolverConfig cfg = finish_solver(f.solver);
  if (f.csls_k < 1) throw InvalidArgumentError("--csls-k must be >= 1");

  RefineRequest req;
  req.source = load_embeddings(f.src, optional_limit(f.vocab_limit));
  req.target = load_embeddings(f.tgt, optional_limit(f.vocab_limit));
  req.retrieval = parse_retrieval(f.retrieval);
  req.csls_k = f.csls_k;
  req.solver = cfg;
  req.loss = f.loss == "l2" ? LossKind::kL2 : LossKind::kL1;
  req.initial_map = f.init == "l2" ? InitialMap::kL2 : InitialMap::kIdentity;
  req.reverse = f.reverse;
  req.dictionary_rows = optional_limit(f.dict_rows);

  const RefineResult r = refine(req);
  save_embeddings(r.refined, f.out);
  write_json(f.report, report_to_json(r.report, !f.no_timing));
  if (!f.map_out.empty()) save_map(r.map.matrix(), f.map_out);
  if (!f.dict_out.empty()) {
    const EmbeddingMatrix& moved = f.reverse ? req.target : req.source;
    const EmbeddingMatrix& fixed = f.reverse ? req.source : req.target;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [i, j] : r.dictionary.pairs) {
      pairs.emplace_back(moved.words()[i], fixed.words()[j]);
    }
    save_token_pairs(pairs, f.dict_out);
  }
  out << "dictionary " << r.dictionary.size() << " pairs (forward "
      << r.forward_size << ", backward " << r.backward_size << "); stop "
      << to_string(r.report.stop_reason) << " after " << r.report.steps_taken
      << " steps\n";
  return kExitOk;
}

struct EvalFlags {
  std::string src, tgt, gold;
  std::string metric = "acc";
  std::string retrieval = "csls";
  int k = kDefaultCslsK;
  int max_rank = kDefaultMaxRank;
  std::size_t vocab_limit = 0;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  if (f.k < 1) throw InvalidArgumentError("--k must be >= 1");
  if (f.max_rank < 1) throw InvalidArgumentError("--max-rank must be >= 1");
  const EmbeddingMatrix s = load_embeddings(f.src, optional_limit(f.vocab_limit));
  const EmbeddingMatrix t = load_embeddings(f.tgt, optional_limit(f.vocab_limit));
  const GoldDictionary gold = load_gold_dictionary(f.gold);
  const RetrievalMethod method = parse_retrieval(f.retrieval);
  const BliResult r = f.metric == "mrr"
                          ? bli_mrr(s, t, gold, method, f.k, f.max_rank)
                          : bli_accuracy(s, t, gold, method, f.k);
  out << bli_to_json(r).dump() << "\n";
  return kExitOk;
}

struct AnalyzeFlags {
  std::string src, tgt, map_before, map_after, dict, out_csv;
  bool iqr = false;
};

int cmd_analyze(const AnalyzeFlags& f, std::ostream& out) {
  const EmbeddingMatrix s = load_embeddings(f.src);
  const EmbeddingMatrix t = load_embeddings(f.tgt);
  if (s.dim() != t.dim()) {
    throw DimensionMismatchError(
        "source dimension " + std::to_string(s.dim()) +
        " differs from target dimension " + std::to_string(t.dim()));
  }
  const OrthogonalMap before(load_map(f.map_before));
  const OrthogonalMap after(load_map(f.map_after));
  const auto tokens = load_token_pairs(f.dict);
  BilingualDictionary dict;
  for (std::size_t line = 0; line < tokens.size(); ++line) {
    const auto& [a, b] = tokens[line];
    const auto i = s.index_of(a);
    const auto j = t.index_of(b);
    if (!i || !j) {
      throw FormatError(f.dict + ": pair " + std::to_string(line) + " (" + a +
                        ", " + b + ") is not in the embedding vocabularies");
    }
    dict.pairs.emplace_back(*i, *j);
  }
  const AlignedPairMatrices pairs =
      compose_pair_matrices(dict, s.vectors(), t.vectors());
  const DistanceDeltaTable table = distance_delta(pairs, before, after);
  write_text(f.out_csv, distance_csv(table));
  if (f.iqr) {
    std::vector<double> original(table.rows.size());
    for (const DistanceDeltaRow& r : table.rows) original[r.pair_id] = r.original;
    const IqrFence fence = iqr_fence(original);
    nlohmann::ordered_json j;
    j["quartiles"] = "linear-interpolation";
    j["q1"] = fence.q1;
    j["q3"] = fence.q3;
    j["threshold"] = fence.threshold;
    j["flagged_pair_ids"] = iqr_outliers(original);
    out << j.dump() << "\n";
  }
  return kExitOk;
}

struct SynthFlags {
  SyntheticParams params;
  std::string out_prefix;
  double prealign = 0.0;
};

std::vector<std::string> numbered(std::string_view prefix, std::size_t n) {
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    words.push_back(std::string(prefix) + std::to_string(i));
  }
  return words;
}

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  const SyntheticProblem p = gen_synthetic(f.params);
  const auto src_words = numbered("s", f.params.n);
  const auto tgt_words = numbered("t", f.params.n);

  Matrix src = p.a;
  Matrix planted = p.q;
  nlohmann::ordered_json sidecar = sidecar_json(p);
  if (f.prealign > 0.0) {
    const Matrix base = perturb_rotation(p.q, f.prealign,
                                         f.params.seed + kBaselineSeedOffset);
    src = p.a * base;
    planted = base.transpose() * p.q;
    sidecar["prealign"] = f.prealign;
  }
  const std::string prefix = f.out_prefix;
  save_embeddings(EmbeddingMatrix(src_words, src), prefix + ".src.vec");
  save_embeddings(EmbeddingMatrix(tgt_words, p.b), prefix + ".tgt.vec");
  save_map(planted, prefix + ".map");
  save_map(Matrix::Identity(p.q.rows(), p.q.cols()), prefix + ".identity.map");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < f.params.n; ++i) {
    pairs.emplace_back(src_words[i], tgt_words[i]);
  }
  save_token_pairs(pairs, prefix + ".dict");
  write_json(prefix + ".json", sidecar);
  out << "wrote " << prefix << ".{src.vec,tgt.vec,map,identity.map,dict,json}\n";
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument: return kExitArgument;
    case ErrorKind::kData: return kExitData;
    case ErrorKind::kNumerical: return kExitNumerical;
  }
  return kExitInternal;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Refine cross-lingual embedding alignments with L1 Procrustes",
               raw_args.empty() ? "l1refine" : raw_args.front()};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string config_unused;

  RefineFlags rf;
  CLI::App* refine = app.add_subcommand(
      "refine", "Bootstrap a mutual dictionary and refine the source space");
  refine->add_option("--src", rf.src, "source embeddings (moved)")
      ->required()->check(CLI::ExistingFile);
  refine->add_option("--tgt", rf.tgt, "target embeddings (fixed)")
      ->required()->check(CLI::ExistingFile);
  refine->add_option("--out", rf.out, "refined source embeddings")->required();
  refine->add_option("--report", rf.report, "report JSON")->required();
  refine->add_option("--loss", rf.loss, "l1 (flow) or l2 (closed form)")
      ->check(CLI::IsMember({"l1", "l2"}))->capture_default_str();
  refine->add_option("--retrieval", rf.retrieval, "dictionary retrieval: csls or nn")
      ->check(CLI::IsMember({"csls", "nn"}))->capture_default_str();
  refine->add_option("--csls-k", rf.csls_k, "CSLS neighbourhood size")
      ->capture_default_str();
  refine->add_option("--init", rf.init, "initial map for the L1 flow: identity or l2")
      ->check(CLI::IsMember({"identity", "l2"}))->capture_default_str();
  add_solver_flags(*refine, rf.solver);
  refine->add_option("--vocab-limit", rf.vocab_limit,
                     "keep the first N rows of each file (0 = all)")
      ->capture_default_str();
  refine->add_option("--dict-rows", rf.dict_rows,
                     "build the dictionary from the first N rows (0 = all)")
      ->capture_default_str();
  refine->add_flag("--reverse", rf.reverse, "move the target onto the source instead");
  refine->add_option("--map-out", rf.map_out, "write the fitted map");
  refine->add_option("--dict-out", rf.dict_out, "write the mutual dictionary");
  refine->add_flag("--no-timing", rf.no_timing,
                   "write wall_time_s as null so reports are reproducible");
  refine->add_option("--config", config_unused, "JSON file of flag defaults");

  EvalFlags ef;
  CLI::App* eval = app.add_subcommand("eval", "Bilingual lexicon induction score");
  eval->add_option("--src", ef.src, "source embeddings")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--tgt", ef.tgt, "target embeddings")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", ef.gold, "gold dictionary, one '<src> <tgt>' per line")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--metric", ef.metric, "acc (precision at 1) or mrr")
      ->check(CLI::IsMember({"acc", "mrr"}))->capture_default_str();
  eval->add_option("--retrieval", ef.retrieval, "csls or nn")
      ->check(CLI::IsMember({"csls", "nn"}))->capture_default_str();
  eval->add_option("--k", ef.k, "CSLS neighbourhood size")->capture_default_str();
  eval->add_option("--max-rank", ef.max_rank, "MRR rank cutoff")
      ->capture_default_str();
  eval->add_option("--vocab-limit", ef.vocab_limit,
                   "keep the first N rows of each file (0 = all)")
      ->capture_default_str();
  eval->add_option("--config", config_unused, "JSON file of flag defaults");

  AnalyzeFlags af;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "Per-pair distance change between two maps");
  analyze->add_option("--src", af.src, "source embeddings")
      ->required()->check(CLI::ExistingFile);
  analyze->add_option("--tgt", af.tgt, "target embeddings")
      ->required()->check(CLI::ExistingFile);
  analyze->add_option("--map-before", af.map_before, "map file before refinement")
      ->required()->check(CLI::ExistingFile);
  analyze->add_option("--map-after", af.map_after, "map file after refinement")
      ->required()->check(CLI::ExistingFile);
  analyze->add_option("--dict", af.dict, "token pairs; line order gives pair_id")
      ->required()->check(CLI::ExistingFile);
  analyze->add_option("--out-csv", af.out_csv, "pair_id,original,refined,delta CSV")
      ->required();
  analyze->add_flag("--iqr", af.iqr,
                    "print pairs whose original distance exceeds Q3 + 1.5 IQR");
  analyze->add_option("--config", config_unused, "JSON file of flag defaults");

  SynthFlags sf;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a planted-rotation problem with outliers");
  synth->add_option("--n", sf.params.n, "pairs")->capture_default_str();
  synth->add_option("--d", sf.params.d, "dimension")->capture_default_str();
  synth->add_option("--sigma", sf.params.sigma, "inlier noise scale")
      ->capture_default_str();
  synth->add_option("--outlier-frac", sf.params.outlier_frac,
                    "fraction of displaced rows, in [0, 1)")
      ->capture_default_str();
  synth->add_option("--outlier-scale", sf.params.outlier_scale,
                    "outlier displacement length")
      ->capture_default_str();
  synth->add_option("--seed", sf.params.seed, "random seed")->capture_default_str();
  synth->add_option("--prealign", sf.prealign,
                    "if > 0, write the source already mapped by a rotation "
                    "this far (Frobenius norm of the Cayley generator) from "
                    "the planted one, seeded with seed + 1000")
      ->capture_default_str();
  synth->add_option("--out-prefix", sf.out_prefix,
                    "writes PREFIX.src.vec, .tgt.vec, .map (planted map for "
                    "the source file), .identity.map, .dict, .json")
      ->required();
  synth->add_option("--config", config_unused, "JSON file of flag defaults");

  std::vector<std::string> args;
  try {
    args = merge_config(raw_args);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitArgument;
  }
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n";
    return kExitArgument;
  }

  try {
    if (*refine) return cmd_refine(rf, out);
    if (*eval) return cmd_eval(ef, out);
    if (*analyze) return cmd_analyze(af, out);
    if (*synth) return cmd_synth(sf, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitArgument;
}

}  // namespace l1refine
