#include "sodyolo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sodyolo/errors.hpp"

namespace sodyolo {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in native little-endian order");

namespace {

void write_doubles(std::string& out, std::span<const double> v) {
  const auto* p = reinterpret_cast<const char*>(v.data());
  out.append(p, v.size() * sizeof(double));
  out.push_back('\n');
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::string line() {
    const auto nl = bytes_.find('\n', pos_);
    if (nl == std::string::npos) throw std::runtime_error("checkpoint: truncated header");
    std::string s = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return s;
  }

  void doubles(std::span<double> out) {
    const std::size_t n = out.size() * sizeof(double);
    if (pos_ + n + 1 > bytes_.size()) throw std::runtime_error("checkpoint: truncated payload");
    std::memcpy(out.data(), bytes_.data() + pos_, n);
    pos_ += n;
    if (bytes_[pos_] != '\n') throw std::runtime_error("checkpoint: corrupt payload terminator");
    ++pos_;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(Model& model) {
  std::string out = std::string(kCheckpointMagic) + "\n";
  KeyValueConfig kv;
  model.config.store(kv);
  out += "config " + std::to_string(kv.entries().size()) + "\n" + kv.serialize();
  model.visit([&out](const std::string& name, Tensor& t, bool) {
    out += "param " + name + " " + std::to_string(t.rank());
    for (auto d : t.shape()) out += " " + std::to_string(d);
    out += "\n";
    write_doubles(out, t.data());
  });
  model.visit_buffers([&out](const std::string& name, std::vector<double>& buf) {
    out += "buffer " + name + " " + std::to_string(buf.size()) + "\n";
    write_doubles(out, buf);
  });
  out += "end\n";
  return out;
}

Model deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  if (r.line() != kCheckpointMagic) {
    throw std::runtime_error(std::string("checkpoint: missing magic ") + kCheckpointMagic);
  }
  std::istringstream hdr(r.line());
  std::string tag;
  std::size_t n = 0;
  hdr >> tag >> n;
  if (tag != "config") throw std::runtime_error("checkpoint: expected config block");
  std::string text;
  for (std::size_t i = 0; i < n; ++i) text += r.line() + "\n";
  ModelConfig cfg;
  cfg.apply(KeyValueConfig::parse(text));

  Model model = Model::create(cfg, 0);
  std::map<std::string, Tensor*> params;
  std::map<std::string, std::vector<double>*> buffers;
  model.visit([&](const std::string& name, Tensor& t, bool) { params[name] = &t; });
  model.visit_buffers([&](const std::string& name, std::vector<double>& b) { buffers[name] = &b; });
  std::size_t seen_params = 0, seen_buffers = 0;

  for (;;) {
    std::istringstream ls(r.line());
    ls >> tag;
    if (tag == "end") break;
    std::string name;
    ls >> name;
    if (tag == "param") {
      auto it = params.find(name);
      if (it == params.end()) throw std::runtime_error("checkpoint: unknown parameter " + name);
      std::size_t rank = 0;
      ls >> rank;
      Shape shape(rank);
      for (auto& d : shape) ls >> d;
      if (shape != it->second->shape()) {
        throw std::runtime_error("checkpoint: parameter " + name + " has shape " +
                                 shape_str(shape) + ", model expects " +
                                 shape_str(it->second->shape()));
      }
      r.doubles(it->second->data());
      ++seen_params;
    } else if (tag == "buffer") {
      auto it = buffers.find(name);
      if (it == buffers.end()) throw std::runtime_error("checkpoint: unknown buffer " + name);
      std::size_t count = 0;
      ls >> count;
      it->second->assign(count, 0.0);
      r.doubles(*it->second);
      ++seen_buffers;
    } else {
      throw std::runtime_error("checkpoint: unexpected record '" + tag + "'");
    }
  }
  if (seen_params != params.size() || seen_buffers != buffers.size()) {
    throw std::runtime_error("checkpoint: incomplete (" + std::to_string(seen_params) + "/" +
                             std::to_string(params.size()) + " parameters)");
  }
  return model;
}

void save_checkpoint(Model& model, const std::string& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str());
}

std::uint64_t model_fingerprint(Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_model(model)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sodyolo
