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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "midx/core.hpp"
#include "midx/diagnostics.hpp"
#include "midx/multi_index.hpp"
#include "midx/rng.hpp"
#include "midx/samplers.hpp"

using namespace midx;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, double scale, Rng& rng) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
  return m;
}

Vec random_vec(std::size_t d, double scale, Rng& rng) {
  Vec v(d);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

Vec catalog_logits(const Matrix& emb, const Vec& z) {
  Vec o(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) o[i] = dot(z, emb.row(i));
  return o;
}

}  // namespace

TEST_CASE("kind names round-trip") {
  for (SamplerKind k : {SamplerKind::uniform, SamplerKind::unigram,
                        SamplerKind::midx_exact, SamplerKind::midx_fast}) {
    auto back = sampler_kind_from_name(sampler_kind_name(k));
    REQUIRE(back.has_value());
    CHECK(*back == k);
  }
  CHECK_FALSE(sampler_kind_from_name("softmax").has_value());
}

TEST_CASE("uniform sampler puts 1/N on every class") {
  const SamplerSpec spec = make_static(SamplerKind::uniform, 5);
  const PreparedQuery pq = prepare(spec, {});
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(proposal_prob(pq, i) == doctest::Approx(0.2).epsilon(1e-15));
  Rng rng(1);
  const SampleBatch b = draw(pq, 1000, rng);
  for (auto idx : b.indices) CHECK(idx < 5);
}

TEST_CASE("unigram sampler normalizes counts and skips zero-count classes") {
  Vec freqs{0.0, 1.0, 1.0};
  const SamplerSpec spec = make_static(SamplerKind::unigram, 3, &freqs);
  const PreparedQuery pq = prepare(spec, {});
  CHECK(proposal_prob(pq, 0) == 0.0);
  CHECK(proposal_prob(pq, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(proposal_prob(pq, 2) == doctest::Approx(0.5).epsilon(1e-15));
  Rng rng(2);
  const SampleBatch b = draw(pq, 100000, rng);
  for (auto idx : b.indices) CHECK(idx != 0);
}

TEST_CASE("unigram empirical frequency is tight at 1e6 draws") {
  Vec freqs{3.0, 1.0};
  const SamplerSpec spec = make_static(SamplerKind::unigram, 2, &freqs);
  const PreparedQuery pq = prepare(spec, {});
  Rng rng(3);
  std::size_t zeros = 0;
  const SampleBatch b = draw(pq, 1000000, rng);
  for (auto idx : b.indices) zeros += (idx == 0);
  const double f = static_cast<double>(zeros) / 1e6;
  CHECK(f > 0.7485);  // 3.5 sigma around 0.75
  CHECK(f < 0.7515);
}

TEST_CASE("static sampler construction validates its inputs") {
  CHECK_THROWS_AS((void)make_static(SamplerKind::uniform, 0), value_error);
  CHECK_THROWS_AS((void)make_static(SamplerKind::unigram, 3), value_error);
  Vec short_freqs{1.0, 2.0};
  CHECK_THROWS_AS((void)make_static(SamplerKind::unigram, 3, &short_freqs),
                  value_error);
  Vec neg{1.0, -1.0, 1.0};
  CHECK_THROWS_AS((void)make_static(SamplerKind::unigram, 3, &neg),
                  value_error);
  Vec zeros{0.0, 0.0};
  CHECK_THROWS_AS((void)make_static(SamplerKind::unigram, 2, &zeros),
                  value_error);
  CHECK_THROWS_AS((void)make_static(SamplerKind::midx_exact, 5), value_error);

  Rng rng(4);
  const Matrix emb = random_matrix(8, 4, 1.0, rng);
  const MultiIndex mi = build_index(emb, 2, QuantKind::product, 5, 5);
  CHECK_THROWS_AS((void)make_midx(SamplerKind::uniform, mi), value_error);
  const SamplerSpec spec = make_midx(SamplerKind::midx_fast, mi);
  Vec wrong_dim{1.0, 2.0};
  CHECK_THROWS_AS((void)prepare(spec, wrong_dim), dimension_error);
}

TEST_CASE("exact midx proposal equals the full softmax for both kinds") {
  Rng rng(10);
  for (QuantKind kind : {QuantKind::product, QuantKind::residual}) {
    const Matrix emb = random_matrix(64, 8, 0.5, rng);
    const MultiIndex mi = build_index(emb, 4, kind, 8, 11);
    const SamplerSpec spec = make_midx(SamplerKind::midx_exact, mi);
    const Vec z = random_vec(8, 1.0, rng);
    const PreparedQuery pq = prepare(spec, z);
    const Vec p = softmax(catalog_logits(emb, z));
    for (std::size_t i = 0; i < 64; ++i)
      CHECK(proposal_prob(pq, i) == doctest::Approx(p[i]).epsilon(1e-10));
  }
}

TEST_CASE("the three stage factors multiply to the proposal probability") {
  Rng rng(12);
  for (SamplerKind sk : {SamplerKind::midx_exact, SamplerKind::midx_fast}) {
    for (QuantKind kind : {QuantKind::product, QuantKind::residual}) {
      const Matrix emb = random_matrix(48, 6, 0.7, rng);
      const MultiIndex mi = build_index(emb, 3, kind, 8, 13);
      const SamplerSpec spec = make_midx(sk, mi);
      const Vec z = random_vec(6, 1.0, rng);
      const PreparedQuery pq = prepare(spec, z);
      for (std::size_t i = 0; i < 48; ++i) {
        const double product = pq.stage1_prob(mi.assign1[i]) *
                               pq.stage2_prob(mi.assign1[i], mi.assign2[i]) *
                               pq.stage3_prob(i);
        CHECK(product == doctest::Approx(proposal_prob(pq, i)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("stage distributions match their brute-force definitions") {
  Rng rng(14);
  const Matrix emb = random_matrix(40, 6, 0.8, rng);
  const MultiIndex mi = build_index(emb, 4, QuantKind::product, 8, 15);
  const SamplerSpec spec = make_midx(SamplerKind::midx_exact, mi);
  const Vec z = random_vec(6, 1.0, rng);
  const PreparedQuery pq = prepare(spec, z);

  const std::size_t K = mi.k();
  const std::size_t h = 3;
  const Vec otilde = residual_scores(mi, z);

  // omega[k1][k2] = sum of exp residual scores over the cell.
  std::vector<double> omega(K * K, 0.0);
  for (std::size_t i = 0; i < emb.rows(); ++i)
    omega[mi.cell_of(i)] += std::exp(otilde[i]);

  // s2[k2] = <second half of z, codeword>; psi[k1] = sum_k2 omega * exp(s2).
  Vec s2(K), psi(K, 0.0);
  for (std::size_t k2 = 0; k2 < K; ++k2) {
    double acc = 0.0;
    for (std::size_t j = 0; j < h; ++j) acc += z[h + j] * mi.book2(k2, j);
    s2[k2] = acc;
  }
  for (std::size_t k1 = 0; k1 < K; ++k1)
    for (std::size_t k2 = 0; k2 < K; ++k2)
      psi[k1] += omega[k1 * K + k2] * std::exp(s2[k2]);

  // Stage 1: P(k1) proportional to exp(<first half, c1>) * psi.
  Vec w1(K);
  double z1 = 0.0;
  for (std::size_t k1 = 0; k1 < K; ++k1) {
    double acc = 0.0;
    for (std::size_t j = 0; j < h; ++j) acc += z[j] * mi.book1(k1, j);
    w1[k1] = std::exp(acc) * psi[k1];
    z1 += w1[k1];
  }
  double stage1_sum = 0.0;
  for (std::size_t k1 = 0; k1 < K; ++k1) {
    CHECK(pq.stage1_prob(k1) ==
          doctest::Approx(w1[k1] / z1).epsilon(1e-10));
    if (psi[k1] > 0.0)
      CHECK(pq.psi_log(k1) ==
            doctest::Approx(std::log(psi[k1])).epsilon(1e-10));
    stage1_sum += pq.stage1_prob(k1);
  }
  CHECK(stage1_sum == doctest::Approx(1.0).epsilon(1e-12));

  // Stage 2 rows normalize over k2 and match omega * exp(s2) / psi.
  for (std::size_t k1 = 0; k1 < K; ++k1) {
    if (psi[k1] <= 0.0) continue;
    double row_sum = 0.0;
    for (std::size_t k2 = 0; k2 < K; ++k2) {
      const double expect = omega[k1 * K + k2] * std::exp(s2[k2]) / psi[k1];
      CHECK(pq.stage2_prob(k1, k2) == doctest::Approx(expect).epsilon(1e-10));
      if (omega[k1 * K + k2] > 0.0)
        CHECK(pq.omega_log(k1 * K + k2) ==
              doctest::Approx(std::log(omega[k1 * K + k2])).epsilon(1e-10));
      row_sum += pq.stage2_prob(k1, k2);
    }
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Stage 3 normalizes within each nonempty cell.
  for (std::size_t c = 0; c < K * K; ++c) {
    const auto& cell = mi.cells[c];
    if (cell.empty()) continue;
    double cell_sum = 0.0;
    for (auto i : cell) cell_sum += pq.stage3_prob(i);
    CHECK(cell_sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Empty cells carry zero stage-2 probability.
  for (std::size_t k1 = 0; k1 < K; ++k1)
    for (std::size_t k2 = 0; k2 < K; ++k2)
      if (mi.cell(k1, k2).empty()) CHECK(pq.stage2_prob(k1, k2) == 0.0);
}

TEST_CASE("fast midx with one codeword per book is the uniform distribution") {
  Rng rng(16);
  const Matrix emb = random_matrix(12, 4, 1.0, rng);
  const MultiIndex mi = build_index(emb, 1, QuantKind::product, 5, 17);
  const SamplerSpec spec = make_midx(SamplerKind::midx_fast, mi);
  const Vec z = random_vec(4, 1.0, rng);
  const PreparedQuery pq = prepare(spec, z);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(proposal_prob(pq, i) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("fast midx equals the softmax when residuals vanish") {
  Matrix emb(4, 2);
  emb(0, 0) = 1.0;
  emb(0, 1) = 1.0;
  emb(1, 0) = 1.0;
  emb(1, 1) = -1.0;
  emb(2, 0) = -1.0;
  emb(2, 1) = 1.0;
  emb(3, 0) = -1.0;
  emb(3, 1) = -1.0;
  const MultiIndex mi = build_index(emb, 2, QuantKind::product, 10, 18);
  REQUIRE(distortion(mi) < 1e-20);
  const SamplerSpec spec = make_midx(SamplerKind::midx_fast, mi);
  Vec z{0.3, -0.7};
  const PreparedQuery pq = prepare(spec, z);
  const Vec p = softmax(catalog_logits(emb, z));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(proposal_prob(pq, i) == doctest::Approx(p[i]).epsilon(1e-12));
}

TEST_CASE("fast midx matches the residual-dropped softmax oracle") {
  Rng rng(20);
  for (QuantKind kind : {QuantKind::product, QuantKind::residual}) {
    const Matrix emb = random_matrix(56, 8, 0.6, rng);
    const MultiIndex mi = build_index(emb, 4, kind, 8, 21);
    const SamplerSpec spec = make_midx(SamplerKind::midx_fast, mi);
    const Vec z = random_vec(8, 1.0, rng);
    const PreparedQuery pq = prepare(spec, z);
    const Vec o = catalog_logits(emb, z);
    const Vec ot = residual_scores(mi, z);
    Vec approx(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) approx[i] = o[i] - ot[i];
    const Vec q = softmax(approx);
    for (std::size_t i = 0; i < o.size(); ++i)
      CHECK(proposal_prob(pq, i) == doctest::Approx(q[i]).epsilon(1e-10));
  }
}

TEST_CASE("proposal probabilities sum to one for every kind") {
  Rng rng(22);
  const Matrix emb = random_matrix(60, 6, 0.8, rng);
  const MultiIndex mi = build_index(emb, 4, QuantKind::residual, 8, 23);
  const Vec z = random_vec(6, 1.0, rng);
  Vec freqs(60);
  for (auto& f : freqs) f = 1.0 + rng.uniform_below(5);

  std::vector<PreparedQuery> pqs;
  pqs.push_back(prepare(make_static(SamplerKind::uniform, 60), z));
  pqs.push_back(prepare(make_static(SamplerKind::unigram, 60, &freqs), z));
  pqs.push_back(prepare(make_midx(SamplerKind::midx_exact, mi), z));
  pqs.push_back(prepare(make_midx(SamplerKind::midx_fast, mi), z));
  for (const auto& pq : pqs) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 60; ++i) sum += proposal_prob(pq, i);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("batch probabilities are bit-identical to proposal_prob") {
  Rng rng(24);
  const Matrix emb = random_matrix(32, 6, 0.8, rng);
  const MultiIndex mi = build_index(emb, 3, QuantKind::product, 8, 25);
  const Vec z = random_vec(6, 1.0, rng);
  for (SamplerKind sk : {SamplerKind::midx_exact, SamplerKind::midx_fast}) {
    const SamplerSpec spec = make_midx(sk, mi);
    const PreparedQuery pq = prepare(spec, z);
    Rng draw_rng(26);
    const SampleBatch b = draw(pq, 500, draw_rng);
    REQUIRE(b.indices.size() == 500);
    REQUIRE(b.probs.size() == 500);
    for (std::size_t t = 0; t < b.m; ++t)
      CHECK(b.probs[t] == proposal_prob(pq, b.indices[t]));
  }
}

TEST_CASE("draws are reproducible given the seed") {
  Rng rng(28);
  const Matrix emb = random_matrix(32, 6, 0.8, rng);
  const MultiIndex mi = build_index(emb, 3, QuantKind::residual, 8, 29);
  const SamplerSpec spec = make_midx(SamplerKind::midx_exact, mi);
  const Vec z = random_vec(6, 1.0, rng);
  const PreparedQuery pq = prepare(spec, z);
  Rng a(30), b(30);
  const SampleBatch ba = draw(pq, 200, a);
  const SampleBatch bb = draw(pq, 200, b);
  CHECK(ba.indices == bb.indices);
  for (std::size_t t = 0; t < 200; ++t) CHECK(ba.probs[t] == bb.probs[t]);
}

TEST_CASE("draw rejects an empty batch request") {
  const SamplerSpec spec = make_static(SamplerKind::uniform, 4);
  const PreparedQuery pq = prepare(spec, {});
  Rng rng(31);
  CHECK_THROWS_AS((void)draw(pq, 0, rng), value_error);
  CHECK_THROWS_AS((void)proposal_prob(pq, 4), value_error);
}

TEST_CASE("chi-square accepts fast-midx draws against its own proposal") {
  Rng rng(32);
  const Matrix emb = random_matrix(16, 4, 0.5, rng);
  const MultiIndex mi = build_index(emb, 2, QuantKind::product, 8, 33);
  const SamplerSpec spec = make_midx(SamplerKind::midx_fast, mi);
  const Vec z = random_vec(4, 1.0, rng);
  const PreparedQuery pq = prepare(spec, z);
  Rng draw_rng(34);
  std::vector<std::uint64_t> counts(16, 0);
  const SampleBatch b = draw(pq, 1000000, draw_rng);
  for (auto idx : b.indices) counts[idx]++;
  Vec expected(16);
  for (std::size_t i = 0; i < 16; ++i) expected[i] = proposal_prob(pq, i);
  const Chi2Result r = chi_square_gof(counts, expected);
  CHECK(r.statistic < chi_square_quantile(r.dof, 0.999));
}

TEST_CASE("chi-square accepts exact-midx draws against the full softmax") {
  Rng rng(36);
  const Matrix emb = random_matrix(16, 4, 0.5, rng);
  const MultiIndex mi = build_index(emb, 2, QuantKind::residual, 8, 37);
  const SamplerSpec spec = make_midx(SamplerKind::midx_exact, mi);
  const Vec z = random_vec(4, 1.0, rng);
  const PreparedQuery pq = prepare(spec, z);
  Rng draw_rng(38);
  std::vector<std::uint64_t> counts(16, 0);
  const SampleBatch b = draw(pq, 1000000, draw_rng);
  for (auto idx : b.indices) counts[idx]++;
  const Vec p = softmax(catalog_logits(emb, z));
  const Chi2Result r = chi_square_gof(counts, p);
  CHECK(r.statistic < chi_square_quantile(r.dof, 0.999));
}
