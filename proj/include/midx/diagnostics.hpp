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

#ifndef MIDX_DIAGNOSTICS_HPP
#define MIDX_DIAGNOSTICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "midx/core.hpp"
#include "midx/samplers.hpp"

namespace midx {

// KL(q||p) = sum q log(q/p), with 0 log 0 = 0. A support violation
// (q_i > 0 where p_i = 0) yields +infinity and sets the flag.
double kl_divergence(std::span<const double> q, std::span<const double> p,
                     bool* support_violation = nullptr);

// Exponential second-order Renyi divergence d2(p||q) = sum p_i^2 / q_i,
// >= 1 with equality iff p = q on the common support.
double renyi_d2(std::span<const double> p, std::span<const double> q,
                bool* support_violation = nullptr);

// Closed-form KL(Q||P) upper bound per sampler kind:
//   uniform  2 |o|_inf
//   unigram  2 |o|_inf + ln(N q_max)
//   midx     2 |otilde|_inf
double kl_bound(SamplerKind kind, std::span<const double> o,
                const Vec* residual_scores = nullptr,
                const Vec* frequencies = nullptr);

// Closed-form gradient-bias bound per sampler kind, all clamped at 2
// (unit logit-gradient convention):
//   uniform  sqrt((exp(2 |o|_inf) - 1) / (M + 1))
//   unigram  sqrt((exp(2 |o|_inf - ln q_min) - 1) / (M + 1))
//   midx     sqrt((exp(2 |otilde|_inf) - 1) / (M + 1))
double bias_bound(SamplerKind kind, std::span<const double> o,
                  const Vec* residual_scores, const Vec* frequencies,
                  std::size_t m);

struct GradBiasResult {
  double measured_bias = 0.0;  // |mean estimate - softmax(o)|_inf
  double bound = 0.0;          // min(2, sqrt((d2 - 1) / (m + 1)))
  double max_stderr = 0.0;     // largest per-coordinate MC standard error
  double d2 = 0.0;
  bool within_bound = false;   // measured <= bound + 3 max_stderr
};

// Monte-Carlo check of the self-normalized importance-sampling gradient
// against its closed-form bound. Each trial draws m+1 classes i.i.d. from
// the proposal, weights them by the softmax of the importance-corrected
// logits o_s - ln q_s, and scatters the weights; the positive's -e_pos
// term is common to estimate and target and cancels in the difference.
// Trials use split rng streams, so the result is independent of trial
// order and may be partitioned across threads.
GradBiasResult grad_bias_mc(const SamplerSpec& spec, std::span<const double> z,
                            const Matrix& emb, std::size_t positive,
                            std::size_t m, std::size_t trials, Rng& rng,
                            std::size_t threads = 1);

// Normalized draw counts over the catalog after m_total draws.
Vec empirical_frequency(const SamplerSpec& spec, std::span<const double> z,
                        std::size_t m_total, Rng& rng);

struct Chi2Result {
  double statistic = 0.0;
  std::size_t dof = 0;
};

// Pearson goodness-of-fit statistic. Cells whose expected count falls
// below 5 are pooled into one tail cell; dof = pooled cells - 1.
Chi2Result chi_square_gof(const std::vector<std::uint64_t>& observed,
                          std::span<const double> expected_probs);

// Upper quantile of the chi-squared distribution with dof degrees.
double chi_square_quantile(std::size_t dof, double prob);

struct TimingRow {
  SamplerKind kind;
  std::size_t n = 0;
  double prepare_sec = 0.0;   // median per-prepare wall time
  double per_draw_sec = 0.0;  // median per-draw wall time
};

// Wall-time profile of prepare and draw across catalog sizes on synthetic
// Gaussian catalogs. Builds use few k-means passes; only prepare/draw are
// timed. Medians over `repeats` runs.
std::vector<TimingRow> timing_profile(const std::vector<SamplerKind>& kinds,
                                      const std::vector<std::size_t>& n_values,
                                      std::size_t k, std::size_t d,
                                      std::size_t m, std::size_t repeats,
                                      std::uint64_t seed);

// One sampler's divergence snapshot for a single query.
struct DivergenceReport {
  std::string kind;
  double kl = 0.0;
  double d2 = 0.0;
  double kl_bound = 0.0;
  double grad_bias_bound = 0.0;
  double o_inf = 0.0;
  double otilde_inf = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  bool kl_within_bound = false;
  bool support_violation = false;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

// Exact O(N) divergence evaluation of a prepared proposal against the
// softmax of the given logits.
DivergenceReport divergence_report(const SamplerSpec& spec,
                                   std::span<const double> z,
                                   const Matrix& emb, std::size_t m);

}  // namespace midx

#endif  // MIDX_DIAGNOSTICS_HPP
