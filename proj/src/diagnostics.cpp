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

#include "midx/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>

#include "json.hpp"
#include "midx/sampled_softmax.hpp"

namespace midx {

double kl_divergence(std::span<const double> q, std::span<const double> p,
                     bool* support_violation) {
  if (q.size() != p.size())
    throw dimension_error("kl_divergence: length mismatch");
  if (support_violation) *support_violation = false;
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    if (p[i] <= 0.0) {
      if (support_violation) *support_violation = true;
      return std::numeric_limits<double>::infinity();
    }
    acc += q[i] * std::log(q[i] / p[i]);
  }
  return acc;
}

double renyi_d2(std::span<const double> p, std::span<const double> q,
                bool* support_violation) {
  if (q.size() != p.size()) throw dimension_error("renyi_d2: length mismatch");
  if (support_violation) *support_violation = false;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      if (support_violation) *support_violation = true;
      return std::numeric_limits<double>::infinity();
    }
    acc += p[i] * p[i] / q[i];
  }
  return acc;
}

namespace {

// Largest and smallest strictly positive normalized frequency.
std::pair<double, double> unigram_qminmax(const Vec& frequencies) {
  double total = 0.0;
  for (double f : frequencies) total += f;
  if (total <= 0.0) throw value_error("unigram: frequency sum must be > 0");
  double qmin = std::numeric_limits<double>::infinity();
  double qmax = 0.0;
  for (double f : frequencies) {
    if (f <= 0.0) continue;
    qmin = std::min(qmin, f / total);
    qmax = std::max(qmax, f / total);
  }
  return {qmin, qmax};
}

}  // namespace

double kl_bound(SamplerKind kind, std::span<const double> o,
                const Vec* residual_scores, const Vec* frequencies) {
  switch (kind) {
    case SamplerKind::uniform:
      return 2.0 * max_abs(o);
    case SamplerKind::unigram: {
      if (frequencies == nullptr)
        throw value_error("kl_bound: unigram needs frequencies");
      auto [qmin, qmax] = unigram_qminmax(*frequencies);
      return 2.0 * max_abs(o) +
             std::log(static_cast<double>(o.size()) * qmax);
    }
    case SamplerKind::midx_exact:
    case SamplerKind::midx_fast:
      if (residual_scores == nullptr)
        throw value_error("kl_bound: midx kinds need residual scores");
      return 2.0 * max_abs(*residual_scores);
  }
  return 0.0;
}

double bias_bound(SamplerKind kind, std::span<const double> o,
                  const Vec* residual_scores, const Vec* frequencies,
                  std::size_t m) {
  double expo = 0.0;
  switch (kind) {
    case SamplerKind::uniform:
      expo = 2.0 * max_abs(o);
      break;
    case SamplerKind::unigram: {
      if (frequencies == nullptr)
        throw value_error("bias_bound: unigram needs frequencies");
      auto [qmin, qmax] = unigram_qminmax(*frequencies);
      expo = 2.0 * max_abs(o) - std::log(qmin);
      break;
    }
    case SamplerKind::midx_exact:
    case SamplerKind::midx_fast:
      if (residual_scores == nullptr)
        throw value_error("bias_bound: midx kinds need residual scores");
      expo = 2.0 * max_abs(*residual_scores);
      break;
  }
  const double inner = (std::expm1(expo)) / (static_cast<double>(m) + 1.0);
  return std::min(2.0, std::sqrt(inner));
}

GradBiasResult grad_bias_mc(const SamplerSpec& spec, std::span<const double> z,
                            const Matrix& emb, std::size_t positive,
                            std::size_t m, std::size_t trials, Rng& rng,
                            std::size_t threads) {
  if (trials < 100) throw value_error("grad_bias_mc: trials must be >= 100");
  if (positive >= emb.rows())
    throw value_error("grad_bias_mc: positive index out of range");
  const std::size_t n = emb.rows();
  Vec o(n);
  for (std::size_t i = 0; i < n; ++i) o[i] = dot(emb.row(i), z);
  const Vec p = softmax(o);

  const PreparedQuery pq = prepare(spec, z);
  GradBiasResult res;
  bool violation = false;
  Vec q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = pq.proposal_prob(i);
  res.d2 = renyi_d2(p, q, &violation);
  res.bound =
      violation
          ? 2.0
          : std::min(2.0, std::sqrt(std::max(0.0, res.d2 - 1.0) /
                                    (static_cast<double>(m) + 1.0)));

  // Per-trial seeds drawn up front so the trial partition does not affect
  // the streams.
  std::vector<std::uint64_t> seeds(trials);
  for (auto& s : seeds) s = rng.next_u64();

  threads = std::max<std::size_t>(1, std::min(threads, trials));
  std::vector<Vec> sums(threads, Vec(n, 0.0));
  std::vector<Vec> sumsqs(threads, Vec(n, 0.0));

  auto worker = [&](std::size_t tid, std::size_t lo, std::size_t hi) {
    Vec corrected(m + 1);
    std::vector<std::uint32_t> idx(m + 1);
    Vec gtrial(n, 0.0);
    std::vector<std::uint32_t> touched;
    touched.reserve(m + 1);
    Vec& sum = sums[tid];
    Vec& sumsq = sumsqs[tid];
    for (std::size_t t = lo; t < hi; ++t) {
      Rng trng(seeds[t]);
      SampleBatch b = draw(pq, m + 1, trng);
      for (std::size_t j = 0; j <= m; ++j) {
        idx[j] = b.indices[j];
        corrected[j] = o[idx[j]] - std::log(b.probs[j]);
      }
      const Vec w = softmax(corrected);
      // Duplicate draws must be summed before squaring, so accumulate the
      // per-trial vector first.
      touched.clear();
      for (std::size_t j = 0; j <= m; ++j) {
        if (gtrial[idx[j]] == 0.0) touched.push_back(idx[j]);
        gtrial[idx[j]] += w[j];
      }
      for (std::uint32_t i : touched) {
        sum[i] += gtrial[i];
        sumsq[i] += gtrial[i] * gtrial[i];
        gtrial[i] = 0.0;
      }
    }
  };

  if (threads == 1) {
    worker(0, 0, trials);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (trials + threads - 1) / threads;
    for (std::size_t tid = 0; tid < threads; ++tid) {
      const std::size_t lo = tid * chunk;
      const std::size_t hi = std::min(trials, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, tid, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  const double t = static_cast<double>(trials);
  res.measured_bias = 0.0;
  res.max_stderr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0, ss = 0.0;
    for (std::size_t tid = 0; tid < threads; ++tid) {
      s += sums[tid][i];
      ss += sumsqs[tid][i];
    }
    const double mean = s / t;
    const double var = std::max(0.0, (ss / t - mean * mean) * t / (t - 1.0));
    res.measured_bias = std::max(res.measured_bias, std::fabs(mean - p[i]));
    res.max_stderr = std::max(res.max_stderr, std::sqrt(var / t));
  }
  res.within_bound = res.measured_bias <= res.bound + 3.0 * res.max_stderr;
  return res;
}

Vec empirical_frequency(const SamplerSpec& spec, std::span<const double> z,
                        std::size_t m_total, Rng& rng) {
  if (m_total < 10000)
    throw value_error("empirical_frequency: m_total must be >= 10^4");
  const PreparedQuery pq = prepare(spec, z);
  Vec freq(spec.n, 0.0);
  // Chunked so the batch buffers stay small.
  const std::size_t chunk = 65536;
  std::size_t left = m_total;
  while (left > 0) {
    const std::size_t take = std::min(chunk, left);
    SampleBatch b = draw(pq, take, rng);
    for (std::uint32_t i : b.indices) freq[i] += 1.0;
    left -= take;
  }
  for (double& f : freq) f /= static_cast<double>(m_total);
  return freq;
}

Chi2Result chi_square_gof(const std::vector<std::uint64_t>& observed,
                          std::span<const double> expected_probs) {
  if (observed.size() != expected_probs.size())
    throw dimension_error("chi_square_gof: length mismatch");
  std::uint64_t total = 0;
  for (auto c : observed) total += c;
  if (total < 1000)
    throw value_error("chi_square_gof: need at least 10^3 observations");
  double psum = 0.0;
  for (double p : expected_probs) {
    if (!(p >= 0.0)) throw value_error("chi_square_gof: bad expected prob");
    psum += p;
  }
  if (std::fabs(psum - 1.0) > 1e-6)
    throw value_error("chi_square_gof: expected probs must sum to 1");

  // Pool cells whose expected count is below 5 into one tail cell.
  double stat = 0.0;
  std::size_t cells = 0;
  double pool_obs = 0.0, pool_exp = 0.0;
  double last_obs = 0.0, last_exp = 0.0;
  bool have_regular = false;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = expected_probs[i] * static_cast<double>(total);
    const double obs = static_cast<double>(observed[i]);
    if (e < 5.0) {
      pool_obs += obs;
      pool_exp += e;
      continue;
    }
    if (have_regular) {
      const double d = last_obs - last_exp;
      stat += d * d / last_exp;
      ++cells;
    }
    last_obs = obs;
    last_exp = e;
    have_regular = true;
  }
  if (pool_exp >= 5.0 || !have_regular) {
    if (have_regular) {
      const double d = last_obs - last_exp;
      stat += d * d / last_exp;
      ++cells;
    }
    if (pool_exp <= 0.0 && !have_regular)
      throw value_error("chi_square_gof: degenerate expected vector");
    if (pool_exp > 0.0) {
      const double d = pool_obs - pool_exp;
      stat += d * d / pool_exp;
      ++cells;
    }
  } else {
    // Tail too small to stand alone: merge into the final regular cell.
    const double obs = last_obs + pool_obs;
    const double e = last_exp + pool_exp;
    const double d = obs - e;
    stat += d * d / e;
    ++cells;
  }
  if (cells < 2)
    throw value_error("chi_square_gof: fewer than two cells after pooling");
  return {stat, cells - 1};
}

double chi_square_quantile(std::size_t dof, double prob) {
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::quantile(dist, prob);
}

std::vector<TimingRow> timing_profile(const std::vector<SamplerKind>& kinds,
                                      const std::vector<std::size_t>& n_values,
                                      std::size_t k, std::size_t d,
                                      std::size_t m, std::size_t repeats,
                                      std::uint64_t seed) {
  if (repeats < 5) throw value_error("timing_profile: repeats must be >= 5");
  using clock = std::chrono::steady_clock;
  std::vector<TimingRow> rows;

  for (std::size_t n : n_values) {
    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * n));
    Matrix emb(n, d);
    for (double& v : emb.data()) v = rng.normal();
    Vec z(d);
    for (double& v : z) v = rng.normal();
    Vec freqs(n);
    for (double& f : freqs) f = 0.5 + rng.uniform01();

    const bool need_index =
        std::any_of(kinds.begin(), kinds.end(), [](SamplerKind kk) {
          return kk == SamplerKind::midx_exact || kk == SamplerKind::midx_fast;
        });
    MultiIndex index;
    if (need_index)
      index = build_index(emb, k, QuantKind::product, 2, seed ^ n);

    for (SamplerKind kind : kinds) {
      SamplerSpec spec;
      switch (kind) {
        case SamplerKind::uniform:
          spec = make_static(kind, n);
          break;
        case SamplerKind::unigram:
          spec = make_static(kind, n, &freqs);
          break;
        default:
          spec = make_midx(kind, index);
      }

      const std::size_t inner =
          kind == SamplerKind::midx_exact ? 10 : 100;
      std::vector<double> prep_times, draw_times;
      for (std::size_t rep = 0; rep < repeats; ++rep) {
        const auto t0 = clock::now();
        for (std::size_t r = 0; r < inner; ++r) {
          PreparedQuery pq = prepare(spec, z);
          (void)pq;
        }
        const auto t1 = clock::now();
        prep_times.push_back(
            std::chrono::duration<double>(t1 - t0).count() /
            static_cast<double>(inner));

        PreparedQuery pq = prepare(spec, z);
        // Warm pass keeps first-touch page faults out of the timed region.
        (void)draw(pq, m, rng);
        const auto t2 = clock::now();
        SampleBatch b = draw(pq, m, rng);
        const auto t3 = clock::now();
        (void)b;
        draw_times.push_back(std::chrono::duration<double>(t3 - t2).count() /
                             static_cast<double>(m));
      }
      std::sort(prep_times.begin(), prep_times.end());
      std::sort(draw_times.begin(), draw_times.end());
      rows.push_back({kind, n, prep_times[prep_times.size() / 2],
                      draw_times[draw_times.size() / 2]});
    }
  }
  return rows;
}

std::string DivergenceReport::to_json() const {
  nlohmann::json j;
  j["kind"] = kind;
  j["kl"] = kl;
  j["d2"] = d2;
  j["kl_bound"] = kl_bound;
  j["grad_bias_bound"] = grad_bias_bound;
  j["o_inf"] = o_inf;
  j["otilde_inf"] = otilde_inf;
  j["q_min"] = q_min;
  j["q_max"] = q_max;
  j["n"] = n;
  j["m"] = m;
  j["kl_within_bound"] = kl_within_bound;
  j["support_violation"] = support_violation;
  return j.dump();
}

std::string DivergenceReport::csv_header() {
  return "kind,kl,d2,kl_bound,grad_bias_bound,o_inf,otilde_inf,q_min,q_max,"
         "n,m,kl_within_bound,support_violation";
}

std::string DivergenceReport::to_csv_row() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu,"
                "%d,%d",
                kind.c_str(), kl, d2, kl_bound, grad_bias_bound, o_inf,
                otilde_inf, q_min, q_max, n, m, static_cast<int>(kl_within_bound),
                static_cast<int>(support_violation));
  return buf;
}

DivergenceReport divergence_report(const SamplerSpec& spec,
                                   std::span<const double> z,
                                   const Matrix& emb, std::size_t m) {
  const std::size_t n = emb.rows();
  Vec o(n);
  for (std::size_t i = 0; i < n; ++i) o[i] = dot(emb.row(i), z);
  const Vec p = softmax(o);

  const PreparedQuery pq = prepare(spec, z);
  Vec q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = pq.proposal_prob(i);

  DivergenceReport rep;
  rep.kind = sampler_kind_name(spec.kind);
  rep.n = n;
  rep.m = m;
  rep.o_inf = max_abs(o);

  bool viol_kl = false, viol_d2 = false;
  rep.kl = kl_divergence(q, p, &viol_kl);
  rep.d2 = renyi_d2(p, q, &viol_d2);
  rep.support_violation = viol_kl || viol_d2;

  const Vec* rs = nullptr;
  Vec rs_store;
  const Vec* freqs = nullptr;
  if (spec.kind == SamplerKind::midx_exact ||
      spec.kind == SamplerKind::midx_fast) {
    rs_store = residual_scores(*spec.index, z);
    rs = &rs_store;
    rep.otilde_inf = max_abs(rs_store);
  }
  if (spec.kind == SamplerKind::unigram) {
    freqs = spec.unigram_probs.get();
    auto [qmin, qmax] = unigram_qminmax(*freqs);
    rep.q_min = qmin;
    rep.q_max = qmax;
  }
  rep.kl_bound = kl_bound(spec.kind, o, rs, freqs);
  rep.grad_bias_bound = bias_bound(spec.kind, o, rs, freqs, m);
  rep.kl_within_bound = rep.kl <= rep.kl_bound + 1e-12;
  return rep;
}

}  // namespace midx
