#include "avatr/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "avatr/error.hpp"

namespace avatr::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'V', 'T', 'R'};

class Writer {
 public:
  template <typename U>
  void put(U v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(U));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : buf(b) {}
  template <typename U>
  U get(const char* what) {
    U v;
    std::memcpy(&v, take(sizeof(U), what), sizeof(U));
    return v;
  }
  const std::uint8_t* take(std::size_t n, const char* what) {
    if (buf.size() - pos < n)
      throw CheckpointError(std::string("bad checkpoint: truncated while reading ") + what);
    const std::uint8_t* p = buf.data() + pos;
    pos += n;
    return p;
  }
  bool done() const { return pos == buf.size(); }

 private:
  std::span<const std::uint8_t> buf;
  std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> save_checkpoint(AvatrModel<float>& model) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint16_t>(kCheckpointVersion);
  const std::string config = model.config().to_text();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.bytes(config.data(), config.size());
  std::uint32_t count = 0;
  model.visit([&](const std::string&, Tensor<float>&) { ++count; });
  w.put<std::uint32_t>(count);
  model.visit([&](const std::string& name, Tensor<float>& t) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
    w.bytes(t.data.data(), t.data.size() * sizeof(float));
  });
  return std::move(w.out);
}

AvatrModel<float> load_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(4, "magic"), kMagic, 4) != 0) throw CheckpointError("bad checkpoint: wrong magic bytes");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("bad checkpoint: unsupported version " + std::to_string(version));
  const auto config_len = r.get<std::uint32_t>("config length");
  const auto* config_text = reinterpret_cast<const char*>(r.take(config_len, "config"));
  ModelConfig config;
  try {
    config = ModelConfig::from_text(std::string_view(config_text, config_len));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad checkpoint: ") + e.what());
  }
  AvatrModel<float> model(config, 0);

  const auto count = r.get<std::uint32_t>("record count");
  std::size_t expected = 0;
  model.visit([&](const std::string&, Tensor<float>&) { ++expected; });
  if (count != expected)
    throw CheckpointError("bad checkpoint: " + std::to_string(count) + " parameter records, config implies " +
                          std::to_string(expected));
  model.visit([&](const std::string& name, Tensor<float>& t) {
    const auto name_len = r.get<std::uint32_t>("name length");
    const std::string stored(reinterpret_cast<const char*>(r.take(name_len, "name")), name_len);
    if (stored != name) throw CheckpointError("bad checkpoint: expected parameter " + name + ", found " + stored);
    const auto rank = r.get<std::uint32_t>("rank");
    ad::Shape shape(rank);
    for (auto& e : shape) e = r.get<std::uint32_t>("extent");
    if (shape != t.shape)
      throw CheckpointError("bad checkpoint: " + name + " has shape " + ad::to_string(shape) + ", config implies " +
                            ad::to_string(t.shape));
    std::memcpy(t.data.data(), r.take(t.data.size() * sizeof(float), "parameter data"), t.data.size() * sizeof(float));
  });
  if (!r.done()) throw CheckpointError("bad checkpoint: trailing bytes");
  return model;
}

void save_checkpoint_file(AvatrModel<float>& model, const std::filesystem::path& path) {
  const auto bytes = save_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

AvatrModel<float> load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_checkpoint(bytes);
}

}  // namespace avatr::model
