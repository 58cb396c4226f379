#pragma once

// Binary weight container. See docs/weight-format.md for the byte layout.
//
//   "LPCW" | u32 version | u32 flags | u32 tensor count | records... | u32 CRC-32
//
// All integers and floats little-endian. The CRC (zlib polynomial) covers
// every byte before it.

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lpcnet/common.hpp"
#include "lpcnet/io.hpp"
#include "lpcnet/model.hpp"
#include "lpcnet/nn.hpp"

namespace lpcnet {

inline constexpr char kWeightMagic[4] = {'L', 'P', 'C', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;
inline constexpr std::uint32_t kFlagFolded = 1u << 0;

enum class WeightErrorKind { BadMagic, VersionMismatch, Truncated, Checksum, Dimension, MissingTensor, BadRecord };

inline const char* to_string(WeightErrorKind k) {
  switch (k) {
    case WeightErrorKind::BadMagic: return "bad magic";
    case WeightErrorKind::VersionMismatch: return "version mismatch";
    case WeightErrorKind::Truncated: return "truncated file";
    case WeightErrorKind::Checksum: return "checksum failure";
    case WeightErrorKind::Dimension: return "dimension inconsistency";
    case WeightErrorKind::MissingTensor: return "missing tensor";
    case WeightErrorKind::BadRecord: return "bad record";
  }
  return "weight error";
}

class WeightFormatError : public Error {
 public:
  WeightFormatError(WeightErrorKind kind, std::string record, const std::string& detail)
      : Error(std::string(to_string(kind)) + (record.empty() ? "" : " in '" + record + "'") + ": " + detail),
        kind_(kind),
        record_(std::move(record)) {}

  WeightErrorKind kind() const { return kind_; }
  const std::string& record() const { return record_; }

 private:
  WeightErrorKind kind_;
  std::string record_;
};

enum class TensorType : std::uint8_t { Dense = 0, BlockSparse = 1 };

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<float>, BlockSparseMatrix> data;

  TensorType type() const { return std::holds_alternative<BlockSparseMatrix>(data) ? TensorType::BlockSparse : TensorType::Dense; }
};

struct TensorFile {
  std::uint32_t version = kWeightVersion;
  std::uint32_t flags = 0;
  std::vector<Tensor> tensors;

  const Tensor* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

// ---------------------------------------------------------------------------
// Writing.

class TensorWriter {
 public:
  void add_dense(const std::string& name, const std::vector<std::uint32_t>& dims, std::span<const float> values) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    require_dims(n == values.size(), "tensor element count");
    header(name, TensorType::Dense, dims);
    for (float v : values) detail::store_le(body_, v);
    ++count_;
  }

  void add_dense(const std::string& name, const DenseMatrix& m) {
    add_dense(name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, m.values());
  }

  void add_vector(const std::string& name, std::span<const float> v) {
    add_dense(name, {static_cast<std::uint32_t>(v.size())}, v);
  }

  void add_sparse(const std::string& name, const BlockSparseMatrix& m) {
    header(name, TensorType::BlockSparse, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())});
    detail::store_le(body_, static_cast<std::uint32_t>(m.block_count()));
    for (const auto& b : m.blocks()) {
      detail::store_le(body_, b.row_start);
      detail::store_le(body_, b.col);
    }
    for (float v : m.block_values()) detail::store_le(body_, v);
    for (float v : m.diagonal()) detail::store_le(body_, v);
    ++count_;
  }

  std::vector<std::uint8_t> finish(std::uint32_t flags, std::uint32_t version = kWeightVersion) const {
    std::vector<std::uint8_t> out(kWeightMagic, kWeightMagic + 4);
    detail::store_le(out, version);
    detail::store_le(out, flags);
    detail::store_le(out, count_);
    out.insert(out.end(), body_.begin(), body_.end());
    detail::store_le(out, crc32_of(out.data(), out.size()));
    return out;
  }

 private:
  void header(const std::string& name, TensorType type, const std::vector<std::uint32_t>& dims) {
    detail::store_le(body_, static_cast<std::uint32_t>(name.size()));
    body_.insert(body_.end(), name.begin(), name.end());
    body_.push_back(static_cast<std::uint8_t>(type));
    detail::store_le(body_, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) detail::store_le(body_, d);
  }

  std::vector<std::uint8_t> body_;
  std::uint32_t count_ = 0;
};

namespace detail {

inline constexpr const char* kGateNames[3] = {"u", "r", "h"};
inline constexpr const char* kInputNames[3] = {"sig", "pred", "exc"};

inline std::string gate_name(const char* prefix, std::size_t g) { return std::string(prefix) + "." + kGateNames[g]; }
inline std::string embed_name(const char* prefix, std::size_t g, std::size_t i) {
  return std::string(prefix) + "." + kGateNames[g] + "." + kInputNames[i];
}

inline void add_conv(TensorWriter& w, const std::string& name, const Conv1dParams& c) {
  w.add_dense(name + ".weight",
              {static_cast<std::uint32_t>(c.outputs()), 3, static_cast<std::uint32_t>(c.inputs())}, c.weight.values());
  w.add_vector(name + ".bias", c.bias);
}

inline void add_dense_layer(TensorWriter& w, const std::string& name, const DenseLayer& l) {
  w.add_dense(name + ".weight", l.weight);
  w.add_vector(name + ".bias", l.bias);
}

}  // namespace detail

/// Serializes a model. With `unfolded` given, the embedding table and GRU_A
/// input submatrices are stored instead of the folded V matrices and the
/// folded flag is cleared.
inline std::vector<std::uint8_t> serialize_model(const Model& m, const UnfoldedEmbeddings* unfolded = nullptr) {
  using detail::embed_name;
  using detail::gate_name;
  TensorWriter w;
  detail::add_conv(w, "frame.conv1", m.frame.conv1);
  detail::add_conv(w, "frame.conv2", m.frame.conv2);
  detail::add_dense_layer(w, "frame.fc1", m.frame.fc1);
  detail::add_dense_layer(w, "frame.fc2", m.frame.fc2);
  const auto& sr = m.sample;
  for (std::size_t g = 0; g < 3; ++g) {
    w.add_sparse(gate_name("gru_a.recurrent", g), sr.gru_a.recurrent[g]);
    w.add_vector(gate_name("gru_a.bias", g), sr.gru_a.bias[g]);
    w.add_dense(gate_name("gru_a.cond", g), sr.cond[g]);
  }
  if (unfolded != nullptr) {
    w.add_dense("embedding", unfolded->embedding);
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t i = 0; i < 3; ++i) {
        w.add_dense(embed_name("gru_a.input", g, i), unfolded->input[FoldedEmbeddings::index(g, i)]);
      }
    }
  } else {
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t i = 0; i < 3; ++i) w.add_dense(embed_name("gru_a.embed", g, i), sr.embed.at(g, i));
    }
  }
  for (std::size_t g = 0; g < 3; ++g) {
    w.add_dense(gate_name("gru_b.input", g), sr.gru_b.input[g]);
    w.add_dense(gate_name("gru_b.recurrent", g), sr.gru_b.recurrent[g]);
    w.add_vector(gate_name("gru_b.bias", g), sr.gru_b.bias[g]);
  }
  w.add_dense("dual_fc.w1", sr.dual_fc.w1);
  w.add_dense("dual_fc.w2", sr.dual_fc.w2);
  w.add_vector("dual_fc.b1", sr.dual_fc.b1);
  w.add_vector("dual_fc.b2", sr.dual_fc.b2);
  w.add_vector("dual_fc.a1", sr.dual_fc.a1);
  w.add_vector("dual_fc.a2", sr.dual_fc.a2);
  return w.finish(unfolded != nullptr ? 0u : kFlagFolded);
}

inline void save_weights(const std::filesystem::path& path, const Model& m, const UnfoldedEmbeddings* unfolded = nullptr) {
  detail::write_file(path, serialize_model(m, unfolded));
}

// ---------------------------------------------------------------------------
// Reading.

namespace detail {

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const std::string& record) const {
    if (pos_ + n > bytes_.size()) {
      throw WeightFormatError(WeightErrorKind::Truncated, record,
                              "expected at least " + std::to_string(pos_ + n) + " bytes, file has " +
                                  std::to_string(bytes_.size()));
    }
  }

  template <class T>
  T read(const std::string& record) {
    need(sizeof(T), record);
    T v = load_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }

  std::vector<float> read_floats(std::size_t n, const std::string& record) {
    need(n * sizeof(float), record);
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }

  std::string read_string(std::size_t n, const std::string& record) {
    need(n, record);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the container and verifies the checksum. Block-sparse records may
/// not store a nonzero weight in a block slot that lies on the diagonal.
inline TensorFile parse_tensor_file(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes);
  in.need(4, "header");
  if (std::memcmp(bytes.data(), kWeightMagic, 4) != 0) {
    throw WeightFormatError(WeightErrorKind::BadMagic, "header", "expected \"LPCW\"");
  }
  in.read<std::uint32_t>("header");
  TensorFile file;
  file.version = in.read<std::uint32_t>("header");
  if (file.version != kWeightVersion) {
    throw WeightFormatError(WeightErrorKind::VersionMismatch, "header",
                            "file version " + std::to_string(file.version) + ", engine supports " +
                                std::to_string(kWeightVersion));
  }
  file.flags = in.read<std::uint32_t>("header");
  const auto count = in.read<std::uint32_t>("header");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string where = "record #" + std::to_string(t);
    const auto name_len = in.read<std::uint32_t>(where);
    Tensor tensor;
    tensor.name = in.read_string(name_len, where);
    const std::string& rec = tensor.name;
    const auto type = in.read<std::uint8_t>(rec);
    const auto rank = in.read<std::uint32_t>(rec);
    if (rank == 0 || rank > 4) throw WeightFormatError(WeightErrorKind::BadRecord, rec, "rank " + std::to_string(rank));
    std::uint64_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      tensor.dims.push_back(in.read<std::uint32_t>(rec));
      elements = std::min<std::uint64_t>(elements * tensor.dims.back(), std::uint64_t{1} << 40);
    }
    if (type == static_cast<std::uint8_t>(TensorType::Dense)) {
      if (elements > bytes.size()) {
        throw WeightFormatError(WeightErrorKind::Truncated, rec,
                                "expected at least " + std::to_string(in.pos() + elements * sizeof(float)) +
                                    " bytes, file has " + std::to_string(bytes.size()));
      }
      in.need(static_cast<std::size_t>(elements * sizeof(float)), rec);
      tensor.data = in.read_floats(static_cast<std::size_t>(elements), rec);
    } else if (type == static_cast<std::uint8_t>(TensorType::BlockSparse)) {
      if (rank != 2) throw WeightFormatError(WeightErrorKind::BadRecord, rec, "block-sparse tensor must be rank 2");
      const std::size_t rows = tensor.dims[0];
      const std::size_t cols = tensor.dims[1];
      const auto nblocks = in.read<std::uint32_t>(rec);
      in.need(static_cast<std::size_t>(nblocks) * (8 + kBlockRows * 4) + std::min(rows, cols) * 4, rec);
      std::vector<SparseBlock> blocks(nblocks);
      for (auto& b : blocks) {
        b.row_start = in.read<std::uint32_t>(rec);
        b.col = in.read<std::uint32_t>(rec);
      }
      auto values = in.read_floats(nblocks * kBlockRows, rec);
      auto diagonal = in.read_floats(std::min(rows, cols), rec);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto c = blocks[b].col;
        if (c >= blocks[b].row_start && c < blocks[b].row_start + kBlockRows &&
            values[b * kBlockRows + (c - blocks[b].row_start)] != 0.0f) {
          throw WeightFormatError(WeightErrorKind::BadRecord, rec,
                                  "block at column " + std::to_string(c) + " stores a diagonal weight");
        }
      }
      try {
        tensor.data = BlockSparseMatrix(rows, cols, std::move(blocks), std::move(values), std::move(diagonal));
      } catch (const Error& e) {
        throw WeightFormatError(WeightErrorKind::BadRecord, rec, e.what());
      }
    } else {
      throw WeightFormatError(WeightErrorKind::BadRecord, rec, "unknown tensor type " + std::to_string(type));
    }
    file.tensors.push_back(std::move(tensor));
  }
  in.need(4, "checksum");
  const std::size_t payload = in.pos();
  const auto stored = in.read<std::uint32_t>("checksum");
  if (in.pos() != bytes.size()) {
    throw WeightFormatError(WeightErrorKind::BadRecord, "checksum",
                            std::to_string(bytes.size() - in.pos()) + " trailing bytes after checksum");
  }
  const auto actual = crc32_of(bytes.data(), payload);
  if (stored != actual) {
    std::ostringstream os;
    os << std::hex << "stored 0x" << stored << ", computed 0x" << actual;
    throw WeightFormatError(WeightErrorKind::Checksum, "checksum", os.str());
  }
  return file;
}

namespace detail {

class TensorLookup {
 public:
  explicit TensorLookup(const TensorFile& f) : file_(f) {}

  const Tensor& get(const std::string& name) const {
    const Tensor* t = file_.find(name);
    if (t == nullptr) throw WeightFormatError(WeightErrorKind::MissingTensor, name, "not present in file");
    return *t;
  }

  const std::vector<float>& dense_values(const Tensor& t) const {
    if (t.type() != TensorType::Dense) throw WeightFormatError(WeightErrorKind::BadRecord, t.name, "expected dense");
    return std::get<std::vector<float>>(t.data);
  }

  std::vector<float> vector(const std::string& name) const {
    const Tensor& t = get(name);
    if (t.dims.size() != 1) throw WeightFormatError(WeightErrorKind::Dimension, name, "expected rank 1");
    return dense_values(t);
  }

  DenseMatrix matrix(const std::string& name) const {
    const Tensor& t = get(name);
    if (t.dims.size() != 2) throw WeightFormatError(WeightErrorKind::Dimension, name, "expected rank 2");
    return DenseMatrix(t.dims[0], t.dims[1], dense_values(t));
  }

  Conv1dParams conv(const std::string& name) const {
    const Tensor& t = get(name + ".weight");
    if (t.dims.size() != 3 || t.dims[1] != 3) {
      throw WeightFormatError(WeightErrorKind::Dimension, t.name, "expected [out, 3, in]");
    }
    return {DenseMatrix(t.dims[0], 3 * static_cast<std::size_t>(t.dims[2]), dense_values(t)), vector(name + ".bias")};
  }

  DenseLayer layer(const std::string& name) const { return {matrix(name + ".weight"), vector(name + ".bias")}; }

  BlockSparseMatrix sparse(const std::string& name) const {
    const Tensor& t = get(name);
    if (t.type() != TensorType::BlockSparse) {
      throw WeightFormatError(WeightErrorKind::BadRecord, name, "expected block-sparse");
    }
    return std::get<BlockSparseMatrix>(t.data);
  }

 private:
  const TensorFile& file_;
};

/// Runs `fn`, turning a DimensionError into a WeightFormatError naming `record`.
template <class Fn>
void check_dims(const std::string& record, Fn&& fn) {
  try {
    fn();
  } catch (const DimensionError& e) {
    throw WeightFormatError(WeightErrorKind::Dimension, record, e.what());
  }
}

}  // namespace detail

inline Model model_from_tensors(const TensorFile& file) {
  using detail::embed_name;
  using detail::gate_name;
  const detail::TensorLookup t(file);
  Model m;
  m.frame.conv1 = t.conv("frame.conv1");
  m.frame.conv2 = t.conv("frame.conv2");
  m.frame.fc1 = t.layer("frame.fc1");
  m.frame.fc2 = t.layer("frame.fc2");
  detail::check_dims("frame", [&] { m.frame.validate(); });

  auto& sr = m.sample;
  for (std::size_t g = 0; g < 3; ++g) {
    sr.gru_a.recurrent[g] = t.sparse(gate_name("gru_a.recurrent", g));
    sr.gru_a.bias[g] = t.vector(gate_name("gru_a.bias", g));
    sr.cond[g] = t.matrix(gate_name("gru_a.cond", g));
    sr.gru_b.input[g] = t.matrix(gate_name("gru_b.input", g));
    sr.gru_b.recurrent[g] = t.matrix(gate_name("gru_b.recurrent", g));
    sr.gru_b.bias[g] = t.vector(gate_name("gru_b.bias", g));
  }
  if (file.flags & kFlagFolded) {
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t i = 0; i < 3; ++i) {
        sr.embed.v[FoldedEmbeddings::index(g, i)] = t.matrix(embed_name("gru_a.embed", g, i));
      }
    }
  } else {
    UnfoldedEmbeddings u;
    u.embedding = t.matrix("embedding");
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t i = 0; i < 3; ++i) {
        u.input[FoldedEmbeddings::index(g, i)] = t.matrix(embed_name("gru_a.input", g, i));
      }
    }
    detail::check_dims("embedding", [&] { sr.embed = fold_embeddings(u); });
  }
  sr.dual_fc.w1 = t.matrix("dual_fc.w1");
  sr.dual_fc.w2 = t.matrix("dual_fc.w2");
  sr.dual_fc.b1 = t.vector("dual_fc.b1");
  sr.dual_fc.b2 = t.vector("dual_fc.b2");
  sr.dual_fc.a1 = t.vector("dual_fc.a1");
  sr.dual_fc.a2 = t.vector("dual_fc.a2");
  detail::check_dims("gru_a", [&] { sr.gru_a.validate(); });
  detail::check_dims("gru_b", [&] { sr.gru_b.validate(); });
  detail::check_dims("dual_fc", [&] { sr.dual_fc.validate(); });
  detail::check_dims("sample", [&] { m.validate(); });
  return m;
}

inline Model parse_weights(const std::vector<std::uint8_t>& bytes) { return model_from_tensors(parse_tensor_file(bytes)); }

inline Model load_weights(const std::filesystem::path& path) { return parse_weights(detail::read_file(path)); }

/// Human-readable listing of every tensor: name, type, shape, sparsity.
inline std::string describe(const TensorFile& file) {
  std::ostringstream os;
  os << "version " << file.version << ", flags 0x" << std::hex << file.flags << std::dec
     << ((file.flags & kFlagFolded) ? " (folded embeddings)" : " (unfolded embeddings)") << ", " << file.tensors.size()
     << " tensors\n";
  for (const auto& t : file.tensors) {
    os << "  " << t.name << "  " << (t.type() == TensorType::Dense ? "dense " : "sparse") << "  [";
    for (std::size_t i = 0; i < t.dims.size(); ++i) os << (i ? ", " : "") << t.dims[i];
    os << "]";
    if (const auto* sp = std::get_if<BlockSparseMatrix>(&t.data)) {
      os << "  blocks=" << sp->block_count() << " density=" << sp->density();
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace lpcnet
