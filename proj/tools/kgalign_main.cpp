#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>

#include "kgalign/eval.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/synth.hpp"
#include "kgalign/training.hpp"

namespace {

struct AlignArgs {
  std::string triplets1, triplets2, features;
  std::string seeds = "none";
  std::string test;
  std::string out;
  std::string matcher = "greedy";
  int dim = 300;
  kgalign::PipelineConfig config;
  int epochs = 80;
  int outer_iters = 0;  // 0: derive from epochs / relabel_period
};

void add_align(CLI::App& app, AlignArgs& args) {
  CLI::App* cmd = app.add_subcommand(
      "align", "Train embeddings, pseudo-label, and write alignment artifacts");
  cmd->add_option("--triplets1", args.triplets1, "Graph 1 triplet file")
      ->required();
  cmd->add_option("--triplets2", args.triplets2, "Graph 2 triplet file")
      ->required();
  cmd->add_option("--features", args.features,
                  "Entity feature file covering both graphs")
      ->required();
  cmd->add_option("--seeds", args.seeds,
                  "Prior alignment seed file, or `none` for a cold start")->capture_default_str();
  cmd->add_option("--test", args.test, "Held-out alignment pairs to score");
  cmd->add_option("--dim", args.dim,
                  "Expected feature dimension (default 300)")->capture_default_str();
  cmd->add_option("--lambda", args.config.rectify.lambda,
                  "Similarity weight in the rectified distance (default 10)")->capture_default_str();
  cmd->add_option("--theta", args.config.rectify.theta,
                  "Candidate distance threshold (default 4)")->capture_default_str();
  cmd->add_option("--w", args.config.loss.w,
                  "Reliability control in (0,1] (default 0.25)")->capture_default_str();
  cmd->add_option("--gamma", args.config.loss.gamma,
                  "Hinge margin (default 1)")->capture_default_str();
  cmd->add_option("--k-neg", args.config.loss.k_negatives,
                  "Negatives per positive (default 125)")->capture_default_str();
  cmd->add_option("--batch", args.config.loss.batch_size,
                  "Batch size (default 256)")->capture_default_str();
  cmd->add_option("--epochs", args.epochs, "Total training epochs (default 80)")->capture_default_str();
  cmd->add_option("--outer-iters", args.outer_iters,
                  "Labeling rounds; default epochs / relabel-period");
  cmd->add_option("--relabel-period", args.config.loss.relabel_period,
                  "Epochs between labeling rounds (default 10)")->capture_default_str();
  cmd->add_option("--lr", args.config.loss.learning_rate,
                  "Adam learning rate (default 0.001)")->capture_default_str();
  cmd->add_option("--rng-seed", args.config.rng_seed, "RNG seed (default 7)")->capture_default_str();
  cmd->add_option("--workers", args.config.workers,
                  "Worker threads for matching and evaluation (default 1)")->capture_default_str();
  cmd->add_option("--matcher", args.matcher,
                  "Pseudo-label matcher: greedy or naive (default greedy)")->capture_default_str()
      ->check(CLI::IsMember({"greedy", "naive"}));
  cmd->add_option("--out", args.out, "Output directory")->required();
}

struct SynthArgs {
  kgalign::SynthSpec spec;
  std::string out;
};

void add_synth(CLI::App& app, SynthArgs& args) {
  CLI::App* cmd = app.add_subcommand(
      "synth", "Generate a synthetic KG pair with known ground truth");
  cmd->add_option("--entities", args.spec.entity_count,
                  "Entities per side (default 500)")->capture_default_str();
  cmd->add_option("--relations", args.spec.relation_count,
                  "Relation count (default 20)")->capture_default_str();
  cmd->add_option("--triplets", args.spec.triplet_count,
                  "Triplets in graph 1 (default 1500)")->capture_default_str();
  cmd->add_option("--dim", args.spec.feature_dim,
                  "Feature dimension (default 16)")->capture_default_str();
  cmd->add_option("--noise", args.spec.feature_noise_sigma,
                  "Feature noise sigma (default 0.05)")->capture_default_str();
  cmd->add_option("--drop", args.spec.edge_drop_rate,
                  "Edge drop rate for graph 2 (default 0.1)")->capture_default_str();
  cmd->add_option("--seed-fraction", args.spec.seed_fraction,
                  "Fraction of truth used as seeds (default 0.3)")->capture_default_str();
  cmd->add_option("--community-size", args.spec.community_size,
                  "Entities per community (default 5)")->capture_default_str();
  cmd->add_option("--within-rate", args.spec.within_community_rate,
                  "Chance a triplet tail stays in the head's community (default 0.4)")->capture_default_str();
  cmd->add_option("--cluster-jitter", args.spec.feature_cluster_jitter,
                  "Feature spread around each community center (default 0.02)")->capture_default_str();
  cmd->add_option("--rng-seed", args.spec.rng_seed, "RNG seed (default 7)")->capture_default_str();
  cmd->add_option("--out", args.out, "Output directory")->required();
}

struct EvalArgs {
  std::string embeddings, test;
  std::string pool = "test";
  int workers = 1;
};

void add_eval(CLI::App& app, EvalArgs& args) {
  CLI::App* cmd =
      app.add_subcommand("eval", "Score saved embeddings against test pairs");
  cmd->add_option("--embeddings", args.embeddings, "Saved embedding file")
      ->required();
  cmd->add_option("--test", args.test, "Alignment pairs to score")->required();
  cmd->add_option("--pool", args.pool,
                  "Ranking pool: test targets or all of graph 2 (default test)")->capture_default_str()
      ->check(CLI::IsMember({"test", "all"}));
  cmd->add_option("--workers", args.workers, "Worker threads (default 1)")->capture_default_str();
}

void write_history(const std::string& path,
                   const std::vector<kgalign::HistoryRecord>& history) {
  std::ofstream out(path);
  if (!out) throw kgalign::DataError("cannot open for writing: " + path);
  for (const kgalign::HistoryRecord& r : history) {
    nlohmann::json row{{"iteration", r.iteration},
                       {"epoch", r.epoch},
                       {"loss", r.loss},
                       {"pseudo_count", r.pseudo_count}};
    if (r.hit1) row["hit1"] = *r.hit1;
    out << row.dump() << '\n';
  }
}

void write_alignment(const std::string& path,
                     const kgalign::AlignmentSet& alignment) {
  std::ofstream out(path);
  if (!out) throw kgalign::DataError("cannot open for writing: " + path);
  char buf[32];
  for (const auto& [e1, e2] : alignment.prior)
    out << e1 << '\t' << e2 << "\t1\tprior\n";
  for (const kgalign::PseudoLabel& l : alignment.pseudo) {
    std::snprintf(buf, sizeof buf, "%.17g", l.reliability);
    out << l.e1 << '\t' << l.e2 << '\t' << buf << "\tpseudo\n";
  }
}

int run_align(const AlignArgs& args, bool dim_given) {
  kgalign::KgPair kg;
  kg.g1 = kgalign::load_triplets(args.triplets1);
  kg.g2 = kgalign::load_triplets(args.triplets2);

  std::vector<std::pair<int, int>> seeds;
  if (args.seeds != "none") seeds = kgalign::load_pairs(args.seeds);
  std::vector<std::pair<int, int>> test;
  if (!args.test.empty()) test = kgalign::load_pairs(args.test);

  // Each side's entity universe is the union of ids across its inputs:
  // entities isolated in the triplet files may still appear in alignment
  // pairs, and the feature file covers them all.
  for (const auto* pairs : {&seeds, &test})
    for (const auto& [a, b] : *pairs) {
      kg.g1.entity_count = std::max(kg.g1.entity_count, a + 1);
      kg.g2.entity_count = std::max(kg.g2.entity_count, b + 1);
    }

  kg.features = kgalign::load_features(args.features, kg.total_entities());
  if (dim_given && kg.feature_dim() != args.dim)
    throw kgalign::DataError("feature file dimension " +
                             std::to_string(kg.feature_dim()) +
                             " does not match --dim " +
                             std::to_string(args.dim));
  kg.validate();

  std::vector<int> unused;
  kgalign::relation_features(kg, &unused);
  if (!unused.empty())
    std::cerr << "warning: " << unused.size()
              << " relation(s) appear in no triplet; their feature rows are zero\n";

  kgalign::PipelineConfig config = args.config;
  config.matcher = args.matcher == "naive" ? kgalign::MatcherKind::Naive
                                           : kgalign::MatcherKind::GreedyOt;
  config.loss.epochs = args.epochs;
  config.loss.outer_iterations =
      args.outer_iters > 0
          ? args.outer_iters
          : (args.epochs + config.loss.relabel_period - 1) /
                config.loss.relabel_period;

  const kgalign::PipelineResult result =
      kgalign::run_pipeline(kg, seeds, config, test);
  if (result.greedy_round_cap_hit)
    std::cerr << "warning: a labeling round hit the 50-round cap\n";

  namespace fs = std::filesystem;
  fs::create_directories(args.out);
  kgalign::save_embeddings((fs::path(args.out) / "embeddings.tsv").string(),
                           result.embeddings, kg.g1.entity_count,
                           kg.g2.entity_count);
  write_alignment((fs::path(args.out) / "alignment.tsv").string(),
                  result.alignment);
  write_history((fs::path(args.out) / "history.jsonl").string(),
                result.history);
  if (!test.empty()) {
    const kgalign::EvalReport report = kgalign::evaluate(
        result.embeddings, kg.g1.entity_count, test, {}, config.workers);
    const std::string text = kgalign::format_report(report);
    std::ofstream report_out((fs::path(args.out) / "report.txt").string());
    report_out << text;
    std::cout << text;
  }
  return 0;
}

int run_synth(const SynthArgs& args) {
  const kgalign::SynthData data = kgalign::generate_synthetic_pair(args.spec);
  std::filesystem::create_directories(args.out);
  kgalign::write_dataset(args.out, data);
  kgalign::save_pairs(
      (std::filesystem::path(args.out) / "truth.tsv").string(), data.truth);
  return 0;
}

int run_eval(const EvalArgs& args) {
  const kgalign::LoadedEmbeddings loaded =
      kgalign::load_embeddings(args.embeddings);
  const auto test = kgalign::load_pairs(args.test);
  std::vector<int> pool;
  if (args.pool == "all") {
    pool.resize(static_cast<std::size_t>(loaded.n2));
    std::iota(pool.begin(), pool.end(), 0);
  }
  const kgalign::EvalReport report =
      kgalign::evaluate(loaded.values, loaded.n1, test, pool, args.workers);
  std::cout << kgalign::format_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph entity alignment via conflict-aware pseudo "
               "labeling and optimal transport"};
  app.require_subcommand(1);

  AlignArgs align_args;
  SynthArgs synth_args;
  EvalArgs eval_args;
  add_align(app, align_args);
  add_synth(app, synth_args);
  add_eval(app, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("align")) {
      const bool dim_given =
          app.get_subcommand("align")->count("--dim") > 0;
      return run_align(align_args, dim_given);
    }
    if (app.got_subcommand("synth")) return run_synth(synth_args);
    return run_eval(eval_args);
  } catch (const kgalign::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
}
