#include "derits/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include <json.hpp>

#include "derits/error.hpp"

namespace derits::model {
namespace {

constexpr std::array<char, 8> kMagic = {'D', 'R', 'T', 'S', 'C', 'K', 'P', 'T'};
constexpr std::array<char, 4> kEnd = {'D', 'E', 'N', 'D'};
constexpr std::uint64_t kMaxNameLength = 4096;
constexpr std::uint64_t kMaxRank = 8;

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    buf_.append(s);
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  void bytes(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::uint64_t max_length) {
    const std::uint64_t n = u64();
    if (n > max_length) fail("string length " + std::to_string(n) + " exceeds limit");
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::kFormat, "checkpoint: " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) fail("truncated file");
  }

  std::string data_;
  std::size_t pos_ = 0;
};

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["lookback"] = c.lookback;
  j["horizon"] = c.horizon;
  j["channels"] = c.channels;
  j["branches"] = c.branches;
  j["fusion_hidden"] = c.hidden_width();
  j["ablation_order"] = c.ablation_order ? nlohmann::ordered_json(*c.ablation_order) : nullptr;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.lookback = j.at("lookback").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.branches = j.at("branches").get<unsigned>();
    c.fusion_hidden = j.at("fusion_hidden").get<std::size_t>();
    if (!j.at("ablation_order").is_null()) c.ablation_order = j.at("ablation_order").get<unsigned>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint: bad config echo: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint: bad config echo: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.str(config_to_json(params.config).dump());
  const auto tensors = parameters(params);
  w.u64(tensors.size());
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u64(t.shape.size());
    for (auto dim : t.shape) w.u64(dim);
    for (double v : t.value) w.f64(v);
  }
  w.bytes(kEnd.data(), kEnd.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open checkpoint for writing: " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open checkpoint: " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));

  ModelParams params = zero_params(config_from_json(r.str(1 << 20)));
  std::map<std::string, ParamRef> expected;
  for (auto& ref : parameters(params)) expected.emplace(ref.name, ref);

  const std::uint64_t count = r.u64();
  if (count != expected.size()) {
    r.fail("expected " + std::to_string(expected.size()) + " tensors, found " + std::to_string(count));
  }
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::string name = r.str(kMaxNameLength);
    auto it = expected.find(name);
    if (it == expected.end()) r.fail("unexpected tensor '" + name + "'");
    const std::uint64_t rank = r.u64();
    if (rank > kMaxRank) r.fail("tensor '" + name + "' has rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = r.u64();
    if (shape != it->second.shape) r.fail("tensor '" + name + "' has the wrong shape");
    for (double& v : it->second.value) {
      v = r.f64();
      if (!std::isfinite(v)) r.fail("tensor '" + name + "' holds a non-finite value");
    }
    expected.erase(it);
  }
  std::array<char, 4> end{};
  r.bytes(end.data(), end.size());
  if (end != kEnd) r.fail("missing end marker");
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  return params;
}

}  // namespace derits::model
