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

#include "midx/toy_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "midx/multi_index.hpp"
#include "midx/sampled_softmax.hpp"

namespace midx {

namespace {

double mean_full_loss(const Matrix& cat, const Matrix& queries,
                      const std::vector<std::uint32_t>& labels) {
  const std::size_t n = cat.rows();
  Vec o(n);
  double acc = 0.0;
  for (std::size_t qi = 0; qi < queries.rows(); ++qi) {
    auto z = queries.row(qi);
    for (std::size_t i = 0; i < n; ++i) o[i] = dot(cat.row(i), z);
    acc += full_loss(o, labels[qi]);
  }
  return acc / static_cast<double>(queries.rows());
}

void check_task(const ToyTask& task) {
  const std::size_t n = task.catalog.rows();
  if (n == 0 || task.catalog.cols() == 0)
    throw value_error("train: empty catalog");
  if (task.queries.rows() == 0) throw value_error("train: no queries");
  if (task.queries.cols() != task.catalog.cols())
    throw dimension_error("train: query/catalog dimension mismatch");
  if (task.labels.size() != task.queries.rows())
    throw dimension_error("train: one label per query required");
  for (auto label : task.labels)
    if (label >= n) throw value_error("train: label out of range");
}

}  // namespace

ToyTask gen_task(std::size_t n_classes, std::size_t dim, std::size_t n_queries,
                 std::size_t clusters, double noise, std::uint64_t seed) {
  if (n_classes == 0 || dim == 0 || n_queries == 0)
    throw value_error("gen_task: sizes must be positive");
  if (clusters == 0 || clusters > n_classes)
    throw value_error("gen_task: need 1 <= clusters <= n_classes");
  if (noise < 0.0 || !std::isfinite(noise))
    throw value_error("gen_task: noise must be finite and >= 0");

  Rng rng(seed);
  Matrix centers(clusters, dim);
  for (double& v : centers.data()) v = rng.normal();

  ToyTask task;
  task.clusters = clusters;
  task.noise = noise;
  task.seed = seed;
  task.catalog = Matrix(n_classes, dim);
  for (std::size_t i = 0; i < n_classes; ++i) {
    auto c = centers.row(i % clusters);
    auto row = task.catalog.row(i);
    for (std::size_t t = 0; t < dim; ++t) row[t] = c[t] + noise * rng.normal();
  }
  task.queries = Matrix(n_queries, dim);
  task.labels.resize(n_queries);
  for (std::size_t qi = 0; qi < n_queries; ++qi) {
    const std::size_t label = rng.uniform_below(n_classes);
    task.labels[qi] = static_cast<std::uint32_t>(label);
    auto src = task.catalog.row(label);
    auto row = task.queries.row(qi);
    for (std::size_t t = 0; t < dim; ++t) row[t] = src[t] + noise * rng.normal();
  }
  return task;
}

TrainReport train(const ToyTask& task, SamplerKind kind, std::size_t m,
                  std::size_t epochs, double lr, std::size_t rebuild_every,
                  std::uint64_t seed, std::size_t k_codewords) {
  check_task(task);
  if (lr < 0.0 || !std::isfinite(lr))
    throw value_error("train: learning rate must be finite and >= 0");
  if (m == 0) throw value_error("train: m must be >= 1");
  const bool midx = kind == SamplerKind::midx_exact || kind == SamplerKind::midx_fast;
  if (midx && rebuild_every == 0)
    throw value_error("train: rebuild_every must be >= 1 for midx samplers");

  const std::size_t n = task.catalog.rows();
  const std::size_t nq = task.queries.rows();
  Matrix cat = task.catalog;
  Rng rng(seed);

  TrainReport rep;
  rep.sampler = sampler_kind_name(kind);
  rep.m = m;
  rep.lr = lr;
  rep.seed = seed;
  rep.full_loss.push_back(mean_full_loss(cat, task.queries, task.labels));
  rep.grad_norm.push_back(0.0);

  MultiIndex index;
  SamplerSpec spec;
  if (kind == SamplerKind::uniform) {
    spec = make_static(kind, n);
  } else if (kind == SamplerKind::unigram) {
    // Smoothed label counts so every class stays reachable.
    Vec freqs(n, 1.0);
    for (auto label : task.labels) freqs[label] += 1.0;
    spec = make_static(kind, n, &freqs);
  }

  std::vector<std::uint32_t> order(nq);
  std::iota(order.begin(), order.end(), 0u);
  Vec o(n);
  std::vector<std::uint32_t> touched;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    try {
      if (midx && epoch % rebuild_every == 0) {
        index = build_index(cat, k_codewords, QuantKind::product, 3,
                            rng.next_u64());
        spec = make_midx(kind, index);
      }
      for (std::size_t i = nq; i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_below(i)]);

      double norm_acc = 0.0;
      for (auto qi : order) {
        auto z = task.queries.row(qi);
        const std::size_t pos = task.labels[qi];
        for (std::size_t i = 0; i < n; ++i) o[i] = dot(cat.row(i), z);

        const PreparedQuery pq = prepare(spec, z);
        const SampleBatch batch = draw(pq, m, rng);
        const CorrectedBatch cb = correct_logits(o, pos, batch);
        const Vec g = sampled_grad_scatter(cb, n);

        touched.assign(cb.sources.begin(), cb.sources.end());
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()),
                      touched.end());
        double norm2 = 0.0;
        for (auto s : touched) {
          norm2 += g[s] * g[s];
          auto row = cat.row(s);
          for (std::size_t t = 0; t < row.size(); ++t)
            row[t] -= lr * g[s] * z[t];
        }
        norm_acc += std::sqrt(norm2);
      }
      rep.grad_norm.push_back(norm_acc / static_cast<double>(nq));
    } catch (const numeric_error&) {
      rep.aborted = true;
      break;
    } catch (const value_error&) {
      // Inputs were validated up front, so a value error mid-epoch means the
      // catalog produced non-finite scores (e.g. the learning rate diverged).
      rep.aborted = true;
      break;
    }
    const double loss = mean_full_loss(cat, task.queries, task.labels);
    rep.full_loss.push_back(loss);
    if (!std::isfinite(loss)) {
      rep.aborted = true;
      break;
    }
  }
  return rep;
}

TrainReport train_full(const ToyTask& task, std::size_t epochs, double lr,
                       std::uint64_t seed) {
  check_task(task);
  if (lr < 0.0 || !std::isfinite(lr))
    throw value_error("train: learning rate must be finite and >= 0");

  const std::size_t n = task.catalog.rows();
  const std::size_t nq = task.queries.rows();
  Matrix cat = task.catalog;
  Rng rng(seed);

  TrainReport rep;
  rep.sampler = "full";
  rep.m = 0;
  rep.lr = lr;
  rep.seed = seed;
  rep.full_loss.push_back(mean_full_loss(cat, task.queries, task.labels));
  rep.grad_norm.push_back(0.0);

  std::vector<std::uint32_t> order(nq);
  std::iota(order.begin(), order.end(), 0u);
  Vec o(n);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = nq; i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_below(i)]);
    double norm_acc = 0.0;
    for (auto qi : order) {
      auto z = task.queries.row(qi);
      for (std::size_t i = 0; i < n; ++i) o[i] = dot(cat.row(i), z);
      const Vec g = full_grad_logits(o, task.labels[qi]);
      double norm2 = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        norm2 += g[s] * g[s];
        auto row = cat.row(s);
        for (std::size_t t = 0; t < row.size(); ++t)
          row[t] -= lr * g[s] * z[t];
      }
      norm_acc += std::sqrt(norm2);
    }
    rep.grad_norm.push_back(norm_acc / static_cast<double>(nq));
    const double loss = mean_full_loss(cat, task.queries, task.labels);
    rep.full_loss.push_back(loss);
    if (!std::isfinite(loss)) {
      rep.aborted = true;
      break;
    }
  }
  return rep;
}

std::string report_csv(const TrainReport& report) {
  std::string out = "epoch,full_loss,grad_norm\n";
  char buf[96];
  for (std::size_t e = 0; e < report.full_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e,
                  report.full_loss[e], report.grad_norm[e]);
    out += buf;
  }
  return out;
}

}  // namespace midx
