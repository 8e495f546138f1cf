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

#include "midx/codebook_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace midx {

namespace {

// The product shape reads per-half subvectors; the residual shape reads
// the full embedding for both books.
std::span<const double> book_input(const Matrix& emb, std::size_t i,
                                   QuantKind kind, int book) {
  auto q = emb.row(i);
  if (kind != QuantKind::product) return q;
  const std::size_t h = emb.cols() / 2;
  return book == 0 ? q.subspan(0, h) : q.subspan(h, h);
}

void check_books(const Matrix& emb, const SoftCodebooks& books) {
  const std::size_t want =
      books.kind == QuantKind::product ? emb.cols() / 2 : emb.cols();
  if (books.kind == QuantKind::product && emb.cols() % 2 != 0)
    throw dimension_error("codebooks: product shape needs an even dimension");
  if (books.book1.cols() != want || books.book2.cols() != want)
    throw dimension_error("codebooks: codeword width mismatch");
  if (books.book1.rows() != books.book2.rows())
    throw dimension_error("codebooks: books must have equal K");
}

}  // namespace

SoftCodebooks soft_codebooks_from(const MultiIndex& index) {
  return {index.kind, index.book1, index.book2};
}

SoftAssign soft_assign(const Matrix& emb, const SoftCodebooks& books) {
  check_books(emb, books);
  const std::size_t n = emb.rows();
  const std::size_t k = books.book1.rows();
  SoftAssign sa{Matrix(n, k), Matrix(n, k)};
  Vec scores(k);
  for (int b = 0; b < 2; ++b) {
    const Matrix& book = b == 0 ? books.book1 : books.book2;
    Matrix& w = b == 0 ? sa.w1 : sa.w2;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = book_input(emb, i, books.kind, b);
      for (std::size_t j = 0; j < k; ++j) scores[j] = dot(x, book.row(j));
      Vec p = softmax(scores);
      std::copy(p.begin(), p.end(), w.row(i).data());
    }
  }
  return sa;
}

Matrix encode(const Matrix& emb, const SoftCodebooks& books,
              const SoftAssign& weights) {
  check_books(emb, books);
  const std::size_t n = emb.rows();
  const std::size_t d = emb.cols();
  const std::size_t k = books.book1.rows();
  const std::size_t h = d / 2;
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    for (int b = 0; b < 2; ++b) {
      const Matrix& book = b == 0 ? books.book1 : books.book2;
      const Matrix& w = b == 0 ? weights.w1 : weights.w2;
      auto dst = books.kind == QuantKind::product
                     ? (b == 0 ? row.subspan(0, h) : row.subspan(h, h))
                     : row;
      for (std::size_t j = 0; j < k; ++j) {
        const double wj = w(i, j);
        auto c = book.row(j);
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += wj * c[t];
      }
    }
  }
  return out;
}

double recon_loss(const Matrix& emb, const Matrix& encoded) {
  if (emb.rows() != encoded.rows() || emb.cols() != encoded.cols())
    throw dimension_error("recon_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < emb.data().size(); ++t) {
    const double d = encoded.data()[t] - emb.data()[t];
    acc += d * d;
  }
  return acc;
}

double kl_loss(std::span<const double> z, const Matrix& emb,
               const Matrix& encoded) {
  const std::size_t n = emb.rows();
  Vec o(n), oe(n);
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = dot(emb.row(i), z);
    oe[i] = dot(encoded.row(i), z);
  }
  const Vec p = softmax(o);
  const Vec pe = softmax(oe);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += p[i] * p[i] / pe[i];
  return std::log(s);
}

double kl_loss_mean(const Matrix& queries, const Matrix& emb,
                    const Matrix& encoded) {
  if (queries.rows() == 0) throw value_error("kl_loss_mean: no queries");
  double acc = 0.0;
  for (std::size_t qi = 0; qi < queries.rows(); ++qi)
    acc += kl_loss(queries.row(qi), emb, encoded);
  return acc / static_cast<double>(queries.rows());
}

CodebookGrads codebook_grad(const Matrix& queries, const Matrix& emb,
                            const SoftCodebooks& books, double lambda) {
  if (lambda < 0.0) throw value_error("codebook_grad: lambda must be >= 0");
  check_books(emb, books);
  const std::size_t n = emb.rows();
  const std::size_t d = emb.cols();
  const std::size_t k = books.book1.rows();
  const std::size_t h = d / 2;
  const bool product = books.kind == QuantKind::product;

  const SoftAssign sa = soft_assign(emb, books);
  const Matrix enc = encode(emb, books, sa);

  // Upstream dL/d(encoded): reconstruction term plus the mean KL term,
  // whose per-query logit gradient is p'_j - p_j^2 / (p'_j * S).
  Matrix up(n, d);
  for (std::size_t t = 0; t < up.data().size(); ++t)
    up.data()[t] = lambda * 2.0 * (enc.data()[t] - emb.data()[t]);
  const double qn = static_cast<double>(queries.rows());
  Vec o(n), oe(n);
  for (std::size_t qi = 0; qi < queries.rows(); ++qi) {
    auto z = queries.row(qi);
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = dot(emb.row(i), z);
      oe[i] = dot(enc.row(i), z);
    }
    const Vec p = softmax(o);
    const Vec pe = softmax(oe);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i] * p[i] / pe[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double g = (pe[i] - p[i] * p[i] / (pe[i] * s)) / qn;
      auto ur = up.row(i);
      for (std::size_t t = 0; t < d; ++t) ur[t] += g * z[t];
    }
  }

  CodebookGrads grads{Matrix(k, product ? h : d), Matrix(k, product ? h : d)};
  Vec a(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (int b = 0; b < 2; ++b) {
      const Matrix& book = b == 0 ? books.book1 : books.book2;
      const Matrix& w = b == 0 ? sa.w1 : sa.w2;
      Matrix& g = b == 0 ? grads.g1 : grads.g2;
      auto x = book_input(emb, i, books.kind, b);
      auto u = product ? (b == 0 ? up.row(i).subspan(0, h)
                                 : up.row(i).subspan(h, h))
                       : up.row(i);
      // a_j = u . c_j; abar = sum_j w_j a_j. Chain rule through both the
      // convex combination and the softmax weights:
      //   dL/dc_j = w_j u + w_j (a_j - abar) x
      double abar = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        a[j] = dot(u, book.row(j));
        abar += w(i, j) * a[j];
      }
      for (std::size_t j = 0; j < k; ++j) {
        const double wj = w(i, j);
        auto gr = g.row(j);
        for (std::size_t t = 0; t < u.size(); ++t)
          gr[t] += wj * u[t] + wj * (a[j] - abar) * x[t];
      }
    }
  }
  return grads;
}

StepTrace codebook_step(SoftCodebooks& books, const Matrix& queries,
                        const Matrix& emb, double lambda, double lr,
                        std::size_t steps, Rng& rng, std::size_t miniset) {
  if (lr < 0.0 || !std::isfinite(lr))
    throw value_error("codebook_step: learning rate must be finite and >= 0");
  const std::size_t nq = queries.rows();
  if (nq == 0) throw value_error("codebook_step: no queries");
  const std::size_t take = std::min(miniset, nq);

  StepTrace trace;
  {
    const SoftAssign sa = soft_assign(emb, books);
    const Matrix enc = encode(emb, books, sa);
    trace.initial_combined =
        lambda * recon_loss(emb, enc) + kl_loss_mean(queries, emb, enc);
  }
  trace.final_combined = trace.initial_combined;

  std::vector<std::size_t> order(nq);
  std::iota(order.begin(), order.end(), 0);
  Matrix mini(take, queries.cols());
  for (std::size_t step = 0; step < steps; ++step) {
    if (take < nq) {
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i < take; ++i)
        std::swap(order[i], order[i + rng.uniform_below(nq - i)]);
    }
    for (std::size_t i = 0; i < take; ++i)
      std::copy_n(queries.row(order[i]).data(), queries.cols(),
                  mini.row(i).data());

    const CodebookGrads g = codebook_grad(mini, emb, books, lambda);
    for (std::size_t t = 0; t < books.book1.data().size(); ++t)
      books.book1.data()[t] -= lr * g.g1.data()[t];
    for (std::size_t t = 0; t < books.book2.data().size(); ++t)
      books.book2.data()[t] -= lr * g.g2.data()[t];

    const SoftAssign sa = soft_assign(emb, books);
    const Matrix enc = encode(emb, books, sa);
    const double rl = recon_loss(emb, enc);
    const double kl = kl_loss_mean(mini, emb, enc);
    trace.steps.push_back({rl, kl});
    if (!std::isfinite(rl) || !std::isfinite(kl)) {
      trace.diverged = true;
      return trace;
    }
  }
  {
    const SoftAssign sa = soft_assign(emb, books);
    const Matrix enc = encode(emb, books, sa);
    trace.final_combined =
        lambda * recon_loss(emb, enc) + kl_loss_mean(queries, emb, enc);
  }
  return trace;
}

}  // namespace midx
