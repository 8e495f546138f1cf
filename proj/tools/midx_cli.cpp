// Copyright 2026 The midx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line surface: data generation, index build, sampling, divergence
// reports, timing, and toy training. Reports go to stdout (JSON for single
// objects, CSV for sweeps); errors go to stderr. Exit codes: 0 success,
// 2 usage, 3 data/format error, 4 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "midx/diagnostics.hpp"
#include "midx/io.hpp"
#include "midx/multi_index.hpp"
#include "midx/samplers.hpp"
#include "midx/toy_trainer.hpp"

namespace {

using namespace midx;

// JSON config file support: {"train": {"epochs": 50}} maps section keys to
// subcommand options. Command-line flags take precedence over config values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool,
                        std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") +
                           e.what());
    }
    if (!j.is_object())
      throw CLI::FileError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, val] : j.items()) {
      if (val.is_object()) {
        for (const auto& [name, v] : val.items())
          items.push_back({{key}, name, scalarize(v)});
      } else {
        items.push_back({{}, key, scalarize(val)});
      }
    }
    return items;
  }

 private:
  static std::vector<std::string> scalarize(const nlohmann::json& v) {
    std::vector<std::string> out;
    if (v.is_array()) {
      for (const auto& e : v) {
        auto inner = scalarize(e);
        out.insert(out.end(), inner.begin(), inner.end());
      }
      return out;
    }
    if (v.is_string())
      out.push_back(v.get<std::string>());
    else
      out.push_back(v.dump());
    return out;
  }
};

QuantKind parse_quant_kind(const std::string& name) {
  if (name == "product") return QuantKind::product;
  if (name == "residual") return QuantKind::residual;
  throw value_error("unknown quantization kind: " + name);
}

SamplerKind parse_sampler_kind(const std::string& name) {
  auto kind = sampler_kind_from_name(name);
  if (!kind) throw value_error("unknown sampler: " + name);
  return *kind;
}

Vec label_frequencies(const std::string& labels_path, std::size_t n) {
  Vec freqs(n, 0.0);
  for (auto cls : load_labels(labels_path)) {
    if (cls >= n) throw value_error("label class id exceeds catalog size");
    freqs[cls] += 1.0;
  }
  return freqs;
}

// Holds the loaded index (if any) alongside the sampler spec that points at
// it, so the spec's non-owning pointer stays valid.
struct LoadedSampler {
  MultiIndex index;
  SamplerSpec spec;
};

LoadedSampler make_sampler(SamplerKind kind, const Matrix& catalog,
                           const std::string& index_path,
                           const std::string& labels_path) {
  LoadedSampler out;
  switch (kind) {
    case SamplerKind::uniform:
      out.spec = make_static(kind, catalog.rows());
      break;
    case SamplerKind::unigram: {
      if (labels_path.empty())
        throw value_error("unigram sampler needs --labels for frequencies");
      const Vec freqs = label_frequencies(labels_path, catalog.rows());
      out.spec = make_static(kind, catalog.rows(), &freqs);
      break;
    }
    case SamplerKind::midx_exact:
    case SamplerKind::midx_fast:
      if (index_path.empty())
        throw value_error("midx samplers need --index (build one with "
                          "`midx build`)");
      out.index = load_index(index_path, catalog);
      out.spec = make_midx(kind, out.index);
      break;
  }
  return out;
}

struct GenOpts {
  std::size_t classes = 256, dim = 16, queries = 128, clusters = 16;
  double noise = 0.25;
  std::uint64_t seed = 0;
  std::string out_prefix = "task";
};

int run_gen(const GenOpts& o) {
  const ToyTask task = gen_task(o.classes, o.dim, o.queries, o.clusters,
                                o.noise, o.seed);
  const std::string catalog_file = o.out_prefix + ".catalog.emb";
  const std::string queries_file = o.out_prefix + ".queries.emb";
  const std::string labels_file = o.out_prefix + ".labels.csv";
  save_embeddings(task.catalog, catalog_file);
  save_embeddings(task.queries, queries_file);
  save_labels(task.labels, labels_file);
  nlohmann::json j;
  j["catalog"] = catalog_file;
  j["queries"] = queries_file;
  j["labels"] = labels_file;
  j["n"] = o.classes;
  j["d"] = o.dim;
  j["n_queries"] = o.queries;
  j["clusters"] = o.clusters;
  j["noise"] = o.noise;
  j["seed"] = o.seed;
  std::cout << j.dump() << "\n";
  return 0;
}

struct BuildOpts {
  std::string emb, out;
  std::size_t k = 8, iters = 10;
  std::string kind = "product";
  std::uint64_t seed = 0;
};

int run_build(const BuildOpts& o) {
  const Matrix emb = load_embeddings(o.emb);
  const MultiIndex index =
      build_index(emb, o.k, parse_quant_kind(o.kind), o.iters, o.seed);
  save_index(index, o.out);
  nlohmann::json j;
  j["n"] = index.n();
  j["d"] = index.dim();
  j["k"] = index.k();
  j["kind"] = o.kind;
  j["distortion"] = distortion(index);
  j["nonempty_cells"] = index.nonempty_cells();
  std::cout << j.dump() << "\n";
  return 0;
}

struct SampleOpts {
  std::string emb, index, labels, queries;
  std::string sampler = "uniform";
  std::size_t query_id = 0, m = 10;
  std::uint64_t seed = 0;
};

int run_sample(const SampleOpts& o) {
  const Matrix catalog = load_embeddings(o.emb);
  const Matrix queries = load_embeddings(o.queries);
  if (o.query_id >= queries.rows())
    throw value_error("--query-id out of range");
  const SamplerKind kind = parse_sampler_kind(o.sampler);
  const LoadedSampler sampler = make_sampler(kind, catalog, o.index, o.labels);
  const PreparedQuery pq = prepare(sampler.spec, queries.row(o.query_id));
  Rng rng(o.seed);
  const SampleBatch batch = draw(pq, o.m, rng);
  std::string out = "index,prob\n";
  char buf[64];
  for (std::size_t j = 0; j < batch.m; ++j) {
    std::snprintf(buf, sizeof(buf), "%u,%.17g\n", batch.indices[j],
                  batch.probs[j]);
    out += buf;
  }
  std::cout << out;
  return 0;
}

struct EvalOpts {
  std::string emb, index, labels, queries;
  std::string sampler = "uniform";
  long long query_id = -1;  // -1 = all queries
  std::size_t m = 16;
  std::string format = "json";
};

int run_eval(const EvalOpts& o) {
  if (o.format != "json" && o.format != "csv")
    throw value_error("--format must be json or csv");
  const Matrix catalog = load_embeddings(o.emb);
  const Matrix queries = load_embeddings(o.queries);
  const SamplerKind kind = parse_sampler_kind(o.sampler);
  const LoadedSampler sampler = make_sampler(kind, catalog, o.index, o.labels);

  std::size_t lo = 0, hi = queries.rows();
  if (o.query_id >= 0) {
    if (static_cast<std::size_t>(o.query_id) >= queries.rows())
      throw value_error("--query-id out of range");
    lo = static_cast<std::size_t>(o.query_id);
    hi = lo + 1;
  }
  if (o.format == "csv") std::cout << DivergenceReport::csv_header() << "\n";
  for (std::size_t qi = lo; qi < hi; ++qi) {
    const DivergenceReport rep =
        divergence_report(sampler.spec, queries.row(qi), catalog, o.m);
    std::cout << (o.format == "json" ? rep.to_json() : rep.to_csv_row())
              << "\n";
  }
  return 0;
}

struct BenchOpts {
  std::vector<std::string> samplers = {"uniform", "unigram", "midx_exact",
                                       "midx_fast"};
  std::vector<std::size_t> n_values = {1000, 10000, 100000};
  std::size_t k = 64, dim = 16, m = 10000, repeats = 7;
  std::uint64_t seed = 0;
};

int run_bench(const BenchOpts& o) {
  std::vector<SamplerKind> kinds;
  for (const auto& name : o.samplers) kinds.push_back(parse_sampler_kind(name));
  const auto rows =
      timing_profile(kinds, o.n_values, o.k, o.dim, o.m, o.repeats, o.seed);
  std::string out = "kind,n,prepare_sec,per_draw_sec\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.9g,%.9g\n",
                  sampler_kind_name(row.kind), row.n, row.prepare_sec,
                  row.per_draw_sec);
    out += buf;
  }
  std::cout << out;
  return 0;
}

struct TrainOpts {
  std::string emb, queries, labels;
  std::string sampler = "midx_fast";
  std::size_t m = 8, epochs = 30, rebuild_every = 1, k = 8;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::string out;  // empty = stdout
};

int run_train(const TrainOpts& o) {
  ToyTask task;
  task.catalog = load_embeddings(o.emb);
  task.queries = load_embeddings(o.queries);
  task.labels = load_labels(o.labels);

  TrainReport rep;
  if (o.sampler == "full") {
    rep = train_full(task, o.epochs, o.lr, o.seed);
  } else {
    rep = train(task, parse_sampler_kind(o.sampler), o.m, o.epochs, o.lr,
                o.rebuild_every, o.seed, o.k);
  }
  const std::string csv = report_csv(rep);
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(o.out, std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + o.out);
    f << csv;
    if (!f) throw io_error("write failed: " + o.out);
  }
  if (rep.aborted) {
    std::cerr << "error: training aborted on non-finite loss; report is "
                 "partial\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive sampled softmax over a quantization multi-index"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file (explicit flags win)");
  std::size_t threads = 1;
  app.add_option("--threads", threads,
                 "library-internal parallelism (reserved; reports stay "
                 "deterministic)")
      ->check(CLI::PositiveNumber);

  GenOpts gen;
  CLI::App* cmd_gen = app.add_subcommand(
      "gen", "generate a clustered catalog, queries, and labels");
  cmd_gen->add_option("--classes", gen.classes)->check(CLI::PositiveNumber);
  cmd_gen->add_option("--dim", gen.dim)->check(CLI::PositiveNumber);
  cmd_gen->add_option("--queries", gen.queries)->check(CLI::PositiveNumber);
  cmd_gen->add_option("--clusters", gen.clusters)->check(CLI::PositiveNumber);
  cmd_gen->add_option("--noise", gen.noise)->check(CLI::NonNegativeNumber);
  cmd_gen->add_option("--seed", gen.seed);
  cmd_gen->add_option("--out-prefix", gen.out_prefix);

  BuildOpts build;
  CLI::App* cmd_build =
      app.add_subcommand("build", "build a two-level index over a catalog");
  cmd_build->add_option("--emb", build.emb, "catalog embedding file")
      ->required();
  cmd_build->add_option("--out", build.out, "index output file")->required();
  cmd_build->add_option("--k", build.k, "codewords per level")
      ->check(CLI::PositiveNumber);
  cmd_build->add_option("--kind", build.kind, "product|residual");
  cmd_build->add_option("--iters", build.iters, "k-means iterations");
  cmd_build->add_option("--seed", build.seed);

  SampleOpts sample;
  CLI::App* cmd_sample =
      app.add_subcommand("sample", "draw classes for one query");
  cmd_sample->add_option("--emb", sample.emb)->required();
  cmd_sample->add_option("--queries", sample.queries)->required();
  cmd_sample->add_option("--query-id", sample.query_id);
  cmd_sample->add_option("--sampler", sample.sampler,
                         "uniform|unigram|midx_exact|midx_fast");
  cmd_sample->add_option("--index", sample.index, "index file (midx kinds)");
  cmd_sample->add_option("--labels", sample.labels,
                         "label CSV for unigram frequencies");
  cmd_sample->add_option("--m", sample.m)->check(CLI::PositiveNumber);
  cmd_sample->add_option("--seed", sample.seed);

  EvalOpts eval;
  CLI::App* cmd_eval = app.add_subcommand(
      "eval", "divergence/bound report per query against a sampler");
  cmd_eval->add_option("--emb", eval.emb)->required();
  cmd_eval->add_option("--queries", eval.queries)->required();
  cmd_eval->add_option("--query-id", eval.query_id,
                       "single query (default: all)");
  cmd_eval->add_option("--sampler", eval.sampler);
  cmd_eval->add_option("--index", eval.index);
  cmd_eval->add_option("--labels", eval.labels);
  cmd_eval->add_option("--m", eval.m, "negatives per draw for the bias bound")
      ->check(CLI::PositiveNumber);
  cmd_eval->add_option("--format", eval.format, "json|csv");

  BenchOpts bench;
  CLI::App* cmd_bench =
      app.add_subcommand("bench", "prepare/draw timing across catalog sizes");
  cmd_bench->add_option("--samplers", bench.samplers)->delimiter(',');
  cmd_bench->add_option("--n-values", bench.n_values)->delimiter(',');
  cmd_bench->add_option("--k", bench.k)->check(CLI::PositiveNumber);
  cmd_bench->add_option("--dim", bench.dim)->check(CLI::PositiveNumber);
  cmd_bench->add_option("--m", bench.m)->check(CLI::PositiveNumber);
  cmd_bench->add_option("--repeats", bench.repeats);
  cmd_bench->add_option("--seed", bench.seed);

  TrainOpts train;
  CLI::App* cmd_train =
      app.add_subcommand("train", "sampled-softmax SGD on a catalog");
  cmd_train->add_option("--emb", train.emb, "catalog embedding file")
      ->required();
  cmd_train->add_option("--queries", train.queries)->required();
  cmd_train->add_option("--labels", train.labels)->required();
  cmd_train->add_option("--sampler", train.sampler,
                        "uniform|unigram|midx_exact|midx_fast|full");
  cmd_train->add_option("--m", train.m)->check(CLI::PositiveNumber);
  cmd_train->add_option("--epochs", train.epochs);
  cmd_train->add_option("--lr", train.lr)->check(CLI::NonNegativeNumber);
  cmd_train->add_option("--rebuild-every", train.rebuild_every);
  cmd_train->add_option("--k", train.k)->check(CLI::PositiveNumber);
  cmd_train->add_option("--seed", train.seed);
  cmd_train->add_option("--out", train.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_gen) return run_gen(gen);
    if (*cmd_build) return run_build(build);
    if (*cmd_sample) return run_sample(sample);
    if (*cmd_eval) return run_eval(eval);
    if (*cmd_bench) return run_bench(bench);
    if (*cmd_train) return run_train(train);
  } catch (const numeric_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
