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

#include "midx/multi_index.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "midx/kmeans.hpp"

static_assert(std::endian::native == std::endian::little,
              "index serialization assumes a little-endian host");

namespace midx {

namespace {

std::uint32_t nearest_row(const Matrix& book, std::span<const double> v) {
  std::uint32_t arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < book.rows(); ++j) {
    double acc = 0.0;
    auto c = book.row(j);
    for (std::size_t t = 0; t < c.size(); ++t) {
      const double d = v[t] - c[t];
      acc += d * d;
    }
    if (acc < best) {
      best = acc;
      arg = static_cast<std::uint32_t>(j);
    }
  }
  return arg;
}

void fill_cells_and_residuals(MultiIndex& idx, const Matrix& emb) {
  const std::size_t n = emb.rows();
  const std::size_t d = emb.cols();
  const std::size_t k = idx.book1.rows();
  idx.residuals = Matrix(n, d);
  idx.cells.assign(k * k, {});
  const std::size_t h = d / 2;
  for (std::size_t i = 0; i < n; ++i) {
    auto q = emb.row(i);
    auto r = idx.residuals.row(i);
    auto c1 = idx.book1.row(idx.assign1[i]);
    auto c2 = idx.book2.row(idx.assign2[i]);
    if (idx.kind == QuantKind::product) {
      for (std::size_t t = 0; t < h; ++t) r[t] = q[t] - c1[t];
      for (std::size_t t = 0; t < h; ++t) r[h + t] = q[h + t] - c2[t];
    } else {
      for (std::size_t t = 0; t < d; ++t) r[t] = q[t] - c1[t] - c2[t];
    }
    idx.cells[idx.assign1[i] * k + idx.assign2[i]].push_back(
        static_cast<std::uint32_t>(i));
  }
}

void check_kind_dims(const Matrix& emb, QuantKind kind) {
  if (emb.rows() == 0 || emb.cols() < 2)
    throw value_error("index: catalog must have N >= 1 and D >= 2");
  if (kind == QuantKind::product && emb.cols() % 2 != 0)
    throw value_error("index: product kind requires an even dimension");
}

}  // namespace

std::size_t MultiIndex::nonempty_cells() const {
  std::size_t c = 0;
  for (const auto& cell : cells) c += cell.empty() ? 0 : 1;
  return c;
}

MultiIndex build_index(const Matrix& emb, std::size_t k, QuantKind kind,
                       std::size_t iters, std::uint64_t seed) {
  check_kind_dims(emb, kind);
  const std::size_t n = emb.rows();
  const std::size_t d = emb.cols();
  MultiIndex idx;
  idx.kind = kind;

  Rng rng(seed);
  Rng rng1 = rng.split();
  Rng rng2 = rng.split();

  if (kind == QuantKind::product) {
    const std::size_t h = d / 2;
    Matrix lo(n, h), hi(n, h);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < h; ++t) {
        lo(i, t) = emb(i, t);
        hi(i, t) = emb(i, h + t);
      }
    KMeansResult r1 = kmeans(lo, k, iters, rng1);
    KMeansResult r2 = kmeans(hi, k, iters, rng2);
    idx.book1 = std::move(r1.centroids);
    idx.book2 = std::move(r2.centroids);
    idx.assign1 = std::move(r1.assign);
    idx.assign2 = std::move(r2.assign);
    idx.k_reduced = r1.k_reduced || r2.k_reduced;
  } else {
    KMeansResult r1 = kmeans(emb, k, iters, rng1);
    Matrix res1(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto c1 = r1.centroids.row(r1.assign[i]);
      for (std::size_t t = 0; t < d; ++t) res1(i, t) = emb(i, t) - c1[t];
    }
    KMeansResult r2 = kmeans(res1, k, iters, rng2);
    idx.book1 = std::move(r1.centroids);
    idx.book2 = std::move(r2.centroids);
    idx.assign1 = std::move(r1.assign);
    idx.assign2 = std::move(r2.assign);
    idx.k_reduced = r1.k_reduced || r2.k_reduced;
  }
  fill_cells_and_residuals(idx, emb);
  return idx;
}

MultiIndex index_from_codebooks(const Matrix& emb, QuantKind kind,
                                const Matrix& book1, const Matrix& book2) {
  check_kind_dims(emb, kind);
  const std::size_t n = emb.rows();
  const std::size_t d = emb.cols();
  if (book1.rows() != book2.rows())
    throw dimension_error("index: codebooks must have equal K");
  const std::size_t want = kind == QuantKind::product ? d / 2 : d;
  if (book1.cols() != want || book2.cols() != want)
    throw dimension_error("index: codeword width does not match the catalog");

  MultiIndex idx;
  idx.kind = kind;
  idx.book1 = book1;
  idx.book2 = book2;
  idx.assign1.resize(n);
  idx.assign2.resize(n);
  const std::size_t h = d / 2;
  Vec tmp(d);
  for (std::size_t i = 0; i < n; ++i) {
    auto q = emb.row(i);
    if (kind == QuantKind::product) {
      idx.assign1[i] = nearest_row(book1, q.subspan(0, h));
      idx.assign2[i] = nearest_row(book2, q.subspan(h, h));
    } else {
      idx.assign1[i] = nearest_row(book1, q);
      auto c1 = book1.row(idx.assign1[i]);
      for (std::size_t t = 0; t < d; ++t) tmp[t] = q[t] - c1[t];
      idx.assign2[i] = nearest_row(book2, tmp);
    }
  }
  fill_cells_and_residuals(idx, emb);
  return idx;
}

double distortion(const MultiIndex& index) {
  double acc = 0.0;
  for (double v : index.residuals.data()) acc += v * v;
  return acc;
}

Vec residual_scores(const MultiIndex& index, std::span<const double> z) {
  if (z.size() != index.dim())
    throw dimension_error("residual_scores: query dimension mismatch");
  Vec out(index.n());
  for (std::size_t i = 0; i < index.n(); ++i)
    out[i] = dot(index.residuals.row(i), z);
  return out;
}

namespace {

constexpr char kMagic[8] = {'M', 'I', 'D', 'X', 'I', 'D', 'X', '1'};

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& f) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw io_error("index file: truncated");
  return v;
}

}  // namespace

void save_index(const MultiIndex& index, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("index file: cannot open for writing: " + path);
  f.write(kMagic, sizeof(kMagic));
  put<std::uint8_t>(f, static_cast<std::uint8_t>(index.kind));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(index.n()));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(index.dim()));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(index.k()));
  for (const Matrix* b : {&index.book1, &index.book2})
    f.write(reinterpret_cast<const char*>(b->data().data()),
            static_cast<std::streamsize>(b->data().size() * sizeof(double)));
  for (const auto* a : {&index.assign1, &index.assign2})
    f.write(reinterpret_cast<const char*>(a->data()),
            static_cast<std::streamsize>(a->size() * sizeof(std::uint32_t)));
  if (!f) throw io_error("index file: write failed: " + path);
}

MultiIndex load_index(const std::string& path, const Matrix& emb) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("index file: cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw io_error("index file: bad magic");
  const auto kind_raw = get<std::uint8_t>(f);
  if (kind_raw > 1) throw io_error("index file: unknown quantizer kind");
  const auto n = get<std::uint32_t>(f);
  const auto d = get<std::uint32_t>(f);
  const auto k = get<std::uint32_t>(f);
  if (n != emb.rows() || d != emb.cols())
    throw io_error("index file: catalog shape mismatch");

  MultiIndex idx;
  idx.kind = static_cast<QuantKind>(kind_raw);
  check_kind_dims(emb, idx.kind);
  const std::size_t cw = idx.kind == QuantKind::product ? d / 2 : d;
  idx.book1 = Matrix(k, cw);
  idx.book2 = Matrix(k, cw);
  for (Matrix* b : {&idx.book1, &idx.book2}) {
    f.read(reinterpret_cast<char*>(b->data().data()),
           static_cast<std::streamsize>(b->data().size() * sizeof(double)));
    if (!f) throw io_error("index file: truncated codebook");
  }
  idx.assign1.resize(n);
  idx.assign2.resize(n);
  for (auto* a : {&idx.assign1, &idx.assign2}) {
    f.read(reinterpret_cast<char*>(a->data()),
           static_cast<std::streamsize>(a->size() * sizeof(std::uint32_t)));
    if (!f) throw io_error("index file: truncated assignments");
    for (std::uint32_t v : *a)
      if (v >= k) throw io_error("index file: assignment out of range");
  }
  fill_cells_and_residuals(idx, emb);
  return idx;
}

}  // namespace midx
