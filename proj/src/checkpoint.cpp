#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "nial/model.hpp"

namespace nial {

namespace {

constexpr char kMagic[4] = {'N', 'I', 'A', 'L'};
constexpr std::uint32_t kVersion = 1;

void write_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

void write_f64(std::ostream& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

struct Reader {
  std::ifstream in;
  std::string path;

  void exact(char* buf, std::streamsize n) {
    in.read(buf, n);
    if (in.gcount() != n) throw CheckpointError("truncated checkpoint: " + path);
  }
  std::uint8_t u8() {
    char c;
    exact(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    char buf[4];
    exact(buf, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
  }
  double f64() {
    char buf[8];
    exact(buf, 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return std::bit_cast<double>(bits);
  }
  std::string str(std::uint32_t n) {
    std::string s(n, '\0');
    if (n > 0) exact(s.data(), static_cast<std::streamsize>(n));
    return s;
  }
};

}  // namespace

void NialModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);

  out.write(kMagic, 4);
  write_u32(out, kVersion);

  const std::string cfg = config_.to_kv();
  write_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  write_u32(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, t] : params_) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (Index d = 0; d < t.rank(); ++d) {
      write_u32(out, static_cast<std::uint32_t>(t.dim(d)));
    }
    for (Index i = 0; i < t.size(); ++i) write_f64(out, t.values()[i]);
  }
  out.flush();
  if (!out.good()) throw IoError("write failed for checkpoint: " + path);
}

NialModel NialModel::load(const std::string& path) {
  Reader r{std::ifstream(path, std::ios::binary), path};
  if (!r.in) throw IoError("cannot open checkpoint: " + path);

  char magic[4];
  r.exact(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("bad magic bytes in " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version) + " in " +
                       path);
  }

  const std::string cfg_text = r.str(r.u32());
  KvConfig kv = KvConfig::parse_text(cfg_text);
  const ModelConfig cfg = ModelConfig::from_kv(kv);
  for (const std::string& key : kv.unread_keys()) {
    throw CheckpointError("unrecognized config key in checkpoint: " + key);
  }

  NialModel model(cfg, 0);
  std::vector<bool> filled(model.params_.size(), false);

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u32());
    const std::uint8_t rank = r.u8();
    Shape shape;
    for (std::uint8_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<Index>(r.u32()));
    }
    if (numel(shape) <= 0) {
      throw CheckpointError("parameter '" + name + "' has invalid shape " + shape_str(shape));
    }

    std::size_t slot = model.params_.size();
    for (std::size_t p = 0; p < model.params_.size(); ++p) {
      if (model.params_[p].first == name) {
        slot = p;
        break;
      }
    }
    if (slot == model.params_.size()) {
      throw CheckpointError("checkpoint names unknown parameter '" + name + "'");
    }
    if (filled[slot]) {
      throw CheckpointError("checkpoint repeats parameter '" + name + "'");
    }
    Tensor t = model.params_[slot].second;
    if (t.shape() != shape) {
      throw CheckpointError("parameter '" + name + "' has shape " + shape_str(shape) +
                            ", expected " + shape_str(t.shape()));
    }
    for (Index j = 0; j < t.size(); ++j) t.values()[j] = r.f64();
    filled[slot] = true;
  }

  for (std::size_t p = 0; p < model.params_.size(); ++p) {
    if (!filled[p]) {
      throw CheckpointError("checkpoint missing parameter '" + model.params_[p].first + "'");
    }
  }
  if (r.in.peek() != std::ifstream::traits_type::eof()) {
    throw CheckpointError("trailing bytes after checkpoint payload in " + path);
  }
  return model;
}

}  // namespace nial
