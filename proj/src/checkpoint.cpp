#include "sigvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "sigvae/textio.hpp"

namespace sigvae::vae {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void matrix(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  Matrix matrix(std::size_t rows, std::size_t cols, std::string_view name) {
    const std::uint32_t r = u32(), c = u32();
    if (r != rows || c != cols) {
      throw CheckpointError("checkpoint block " + std::string(name) + " has shape " +
                            std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    }
    Matrix m(rows, cols);
    for (double& v : m.data()) v = f64();
    return m;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const VaeParams& params) {
  const VaeConfig& c = params.config;
  Writer w;
  w.raw("SVAE");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.input_dim));
  w.u32(static_cast<std::uint32_t>(c.intermediate_dim));
  w.u32(static_cast<std::uint32_t>(c.latent_dim));
  w.f64(c.beta);
  w.f64(c.learning_rate);
  w.u32(static_cast<std::uint32_t>(c.epochs));
  w.u32(static_cast<std::uint32_t>(c.batch_size));
  w.u64(c.seed);
  w.u32(c.anneal.kind == Anneal::Kind::linear ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(c.anneal.ramp_epochs));
  w.u64(params.adam_step);
  for (const auto* set : {&params.weights, &params.adam_m, &params.adam_v})
    for (const Matrix& m : *set) w.matrix(m);
  return w.take();
}

VaeParams deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.raw(4) != "SVAE") throw CheckpointError("not a checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  VaeConfig c;
  c.input_dim = r.u32();
  c.intermediate_dim = r.u32();
  c.latent_dim = r.u32();
  c.beta = r.f64();
  c.learning_rate = r.f64();
  c.epochs = r.u32();
  c.batch_size = r.u32();
  c.seed = r.u64();
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw CheckpointError("unknown anneal kind " + std::to_string(kind));
  c.anneal.kind = kind == 1 ? Anneal::Kind::linear : Anneal::Kind::none;
  c.anneal.ramp_epochs = r.u32();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint config: ") + e.what());
  }

  VaeParams p = zero_params(c);
  p.adam_step = r.u64();
  for (auto* set : {&p.weights, &p.adam_m, &p.adam_v})
    for (std::size_t b = 0; b < kBlockCount; ++b)
      (*set)[b] = r.matrix((*set)[b].rows(), (*set)[b].cols(), block_name(b));
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint payload");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const VaeParams& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

VaeParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string sidecar_json(const VaeParams& params, const std::vector<LossBreakdown>& history) {
  const VaeConfig& c = params.config;
  nlohmann::ordered_json j;
  j["format"] = "SVAE";
  j["version"] = kCheckpointVersion;
  j["config"] = {{"input_dim", c.input_dim},
                 {"intermediate_dim", c.intermediate_dim},
                 {"latent_dim", c.latent_dim},
                 {"beta", c.beta},
                 {"learning_rate", c.learning_rate},
                 {"epochs", c.epochs},
                 {"batch_size", c.batch_size},
                 {"seed", c.seed},
                 {"anneal", c.anneal.kind == Anneal::Kind::linear ? "linear" : "none"},
                 {"anneal_ramp_epochs", c.anneal.ramp_epochs}};
  if (history.empty()) {
    j["final_loss"] = nullptr;
  } else {
    const auto& l = history.back();
    j["final_loss"] = {{"epoch", l.epoch},
                       {"recon", l.recon},
                       {"kl", l.kl},
                       {"beta_effective", l.beta_effective},
                       {"total", l.total}};
  }
  j["epochs_run"] = history.size();
  return j.dump(2) + "\n";
}

std::string format_loss_history(const std::vector<LossBreakdown>& history) {
  std::string out = "epoch,recon,kl,beta_effective,total\n";
  for (const auto& l : history) {
    out += std::to_string(l.epoch) + "," + format_double(l.recon) + "," + format_double(l.kl) +
           "," + format_double(l.beta_effective) + "," + format_double(l.total) + "\n";
  }
  return out;
}

std::vector<LossBreakdown> parse_loss_history(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,recon,kl,beta_effective,total")
    throw std::runtime_error("loss history: bad header");
  std::vector<LossBreakdown> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossBreakdown l;
    char comma;
    std::istringstream row(line);
    if (!(row >> l.epoch >> comma >> l.recon >> comma >> l.kl >> comma >> l.beta_effective >>
          comma >> l.total))
      throw std::runtime_error("loss history: malformed row '" + line + "'");
    out.push_back(l);
  }
  return out;
}

}  // namespace sigvae::vae
