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

#ifndef MIDX_TOY_TRAINER_HPP
#define MIDX_TOY_TRAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "midx/core.hpp"
#include "midx/samplers.hpp"

namespace midx {

// A bilinear classification task: score(query, class) = query . catalog[class].
// Only the catalog trains; queries are frozen so that runs differ only in how
// negatives are sampled.
struct ToyTask {
  Matrix catalog;                      // N x D class embeddings (trainable)
  Matrix queries;                      // Q x D
  std::vector<std::uint32_t> labels;   // positive class per query
  std::size_t clusters = 0;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

// Gaussian-mixture task: cluster centers are standard normal, class i sits at
// center (i mod clusters) plus noise, and each query is a noisy copy of its
// labeled class embedding. Deterministic per seed.
ToyTask gen_task(std::size_t n_classes, std::size_t dim, std::size_t n_queries,
                 std::size_t clusters, double noise, std::uint64_t seed);

struct TrainReport {
  std::vector<double> full_loss;  // epochs + 1 entries; [0] is pre-training
  std::vector<double> grad_norm;  // same length; per-epoch mean step norm
  std::string sampler;
  std::size_t m = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  bool aborted = false;  // a non-finite loss cut training short
};

// SGD over the catalog with sampled-softmax gradients: per query, draw m
// negatives from the sampler, correct the logits, and scatter the update onto
// the touched rows. The evaluation metric is always the exact full-softmax
// loss so that reports are comparable across samplers. For the midx kinds the
// index is rebuilt from the current catalog every rebuild_every epochs.
TrainReport train(const ToyTask& task, SamplerKind kind, std::size_t m,
                  std::size_t epochs, double lr, std::size_t rebuild_every,
                  std::uint64_t seed, std::size_t k_codewords = 8);

// The dense baseline: every step applies the exact softmax gradient to all
// catalog rows.
TrainReport train_full(const ToyTask& task, std::size_t epochs, double lr,
                       std::uint64_t seed);

// "epoch,full_loss,grad_norm" rows, one per recorded epoch.
std::string report_csv(const TrainReport& report);

}  // namespace midx

#endif  // MIDX_TOY_TRAINER_HPP
