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

#include "midx/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace midx {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian");

namespace {

constexpr char kEmbMagic[8] = {'M', 'I', 'D', 'X', 'E', 'M', 'B', '1'};

void write_bytes(std::ofstream& out, const void* p, std::size_t len,
                 const std::string& path) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
  if (!out) throw io_error("write failed: " + path);
}

void read_bytes(std::ifstream& in, void* p, std::size_t len,
                const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
  if (in.gcount() != static_cast<std::streamsize>(len))
    throw io_error("truncated file: " + path);
}

}  // namespace

void save_embeddings(const Matrix& emb, const std::string& path) {
  if (emb.rows() == 0 || emb.cols() == 0)
    throw value_error("save_embeddings: empty matrix");
  if (emb.rows() > std::numeric_limits<std::uint32_t>::max() ||
      emb.cols() > std::numeric_limits<std::uint32_t>::max())
    throw value_error("save_embeddings: dimensions exceed u32");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  write_bytes(out, kEmbMagic, sizeof(kEmbMagic), path);
  const std::uint32_t n = static_cast<std::uint32_t>(emb.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(emb.cols());
  write_bytes(out, &n, sizeof(n), path);
  write_bytes(out, &d, sizeof(d), path);
  std::vector<float> payload(emb.data().size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    payload[i] = static_cast<float>(emb.data()[i]);
    if (!std::isfinite(payload[i]))
      throw value_error("save_embeddings: non-finite value");
  }
  write_bytes(out, payload.data(), payload.size() * sizeof(float), path);
  out.close();
  if (!out) throw io_error("write failed: " + path);
}

Matrix load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  char magic[8];
  read_bytes(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kEmbMagic, sizeof(magic)) != 0)
    throw io_error("not an embedding file (bad magic): " + path);
  std::uint32_t n = 0, d = 0;
  read_bytes(in, &n, sizeof(n), path);
  read_bytes(in, &d, sizeof(d), path);
  if (n == 0 || d == 0) throw io_error("empty embedding file: " + path);
  std::vector<float> payload(static_cast<std::size_t>(n) * d);
  read_bytes(in, payload.data(), payload.size() * sizeof(float), path);
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0)
    throw io_error("trailing bytes after payload: " + path);
  Matrix emb(n, d);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (!std::isfinite(payload[i]))
      throw io_error("non-finite embedding value: " + path);
    emb.data()[i] = static_cast<double>(payload[i]);
  }
  return emb;
}

void save_labels(const std::vector<std::uint32_t>& labels,
                 const std::string& path) {
  if (labels.empty()) throw value_error("save_labels: empty label set");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "query_id,class_id\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << i << ',' << labels[i] << '\n';
  out.close();
  if (!out) throw io_error("write failed: " + path);
}

std::vector<std::uint32_t> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "query_id,class_id")
    throw io_error("bad label CSV header: " + path);
  std::vector<std::uint32_t> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw io_error("malformed label row: " + path);
    try {
      const unsigned long id = std::stoul(line.substr(0, comma));
      const unsigned long cls = std::stoul(line.substr(comma + 1));
      if (id != labels.size() ||
          cls > std::numeric_limits<std::uint32_t>::max())
        throw io_error("label row out of order or range: " + path);
      labels.push_back(static_cast<std::uint32_t>(cls));
    } catch (const std::logic_error&) {
      throw io_error("malformed label row: " + path);
    }
  }
  if (labels.empty()) throw io_error("no label rows: " + path);
  return labels;
}

}  // namespace midx
