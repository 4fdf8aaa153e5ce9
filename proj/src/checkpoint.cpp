#include "skelfall/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace skelfall {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'F', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
T le_swap(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<uint8_t, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

void write_u32(std::ostream& out, uint32_t v) {
  v = le_swap(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
  v = le_swap(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return le_swap(v);
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return le_swap(v);
}

void write_reals(std::ostream& out, const std::vector<real>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(real)));
  } else {
    for (real v : values) {
      const real s = le_swap(v);
      out.write(reinterpret_cast<const char*>(&s), sizeof(s));
    }
  }
}

void read_reals(std::istream& in, std::vector<real>& values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(real)));
  if constexpr (std::endian::native != std::endian::little)
    for (real& v : values) v = le_swap(v);
}

const char* dtype_name() { return sizeof(real) == 8 ? "f64" : "f32"; }

nlohmann::json topology_json(const SkeletonTopology& topo) {
  nlohmann::json edges = nlohmann::json::array();
  for (auto [i, j] : topo.edges) edges.push_back({i, j});
  return {{"joints", topo.joint_count}, {"center", topo.center_joint}, {"edges", edges}};
}

SkeletonTopology topology_from_json(const nlohmann::json& j) {
  SkeletonTopology topo;
  topo.joint_count = j.at("joints").get<int>();
  topo.center_joint = j.at("center").get<int>();
  for (const auto& e : j.at("edges"))
    topo.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  return topo;
}

}  // namespace

void save_checkpoint(FallDetectorNet& net, const RunConfig& cfg, const std::string& path) {
  nlohmann::json header;
  header["config"] = run_config_to_json(cfg);
  header["topology"] = topology_json(net.topology());
  header["dtype"] = dtype_name();
  nlohmann::json entries = nlohmann::json::array();
  auto params = net.parameters();
  for (const auto& p : params)
    entries.push_back({{"name", p.name}, {"kind", "param"}, {"shape", p.tensor.shape()}});
  auto buffers = net.buffers();
  for (const auto& [name, vec] : buffers)
    entries.push_back({{"name", name}, {"kind", "buffer"}, {"size", vec->size()}});
  entries.push_back({{"name", "norm.mean"}, {"kind", "stats"}, {"size", 3}});
  entries.push_back({{"name", "norm.std"}, {"kind", "stats"}, {"size", 3}});
  header["tensors"] = entries;
  const std::string header_bytes = header.dump();

  // Atomic write: temp file in the same directory, then rename.
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u64(out, header_bytes.size());
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    for (const auto& p : params) write_reals(out, p.tensor.data());
    for (const auto& [name, vec] : buffers) write_reals(out, *vec);
    const auto& stats = net.norm_stats();
    write_reals(out, {stats.mean[0], stats.mean[1], stats.mean[2]});
    write_reals(out, {stats.stddev[0], stats.stddev[1], stats.stddev[2]});
    if (!out) fail(ErrorCode::io, "write failed: " + path);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorCode::io, "cannot move checkpoint into place: " + path + ": " + ec.message());
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorCode::format, path + ": not a skelfall checkpoint");
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    fail(ErrorCode::format, path + ": unsupported checkpoint version " + std::to_string(version));
  const uint64_t header_len = read_u64(in);
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!in) fail(ErrorCode::format, path + ": truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, path + ": bad checkpoint header: " + e.what());
  }
  if (header.at("dtype").get<std::string>() != dtype_name())
    fail(ErrorCode::config, path + ": checkpoint dtype " + header.at("dtype").get<std::string>() +
                                " does not match this build (" + dtype_name() + ")");

  LoadedModel loaded;
  loaded.config = run_config_from_json(header.at("config"));
  SkeletonTopology topo = topology_from_json(header.at("topology"));
  loaded.net = std::make_unique<FallDetectorNet>(loaded.config.model, topo);

  auto params = loaded.net->parameters();
  auto buffers = loaded.net->buffers();
  auto& stats = loaded.net->norm_stats();
  size_t pi = 0, bi = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::string kind = entry.at("kind").get<std::string>();
    if (kind == "param") {
      if (pi >= params.size() || params[pi].name != name)
        fail(ErrorCode::format, path + ": unexpected parameter '" + name + "'");
      auto& tensor = params[pi].tensor;
      const Shape shape = entry.at("shape").get<Shape>();
      if (shape != tensor.shape())
        fail(ErrorCode::format, path + ": shape mismatch for '" + name + "'");
      read_reals(in, tensor.data());
      ++pi;
    } else if (kind == "buffer") {
      if (bi >= buffers.size() || buffers[bi].first != name)
        fail(ErrorCode::format, path + ": unexpected buffer '" + name + "'");
      if (entry.at("size").get<size_t>() != buffers[bi].second->size())
        fail(ErrorCode::format, path + ": size mismatch for '" + name + "'");
      read_reals(in, *buffers[bi].second);
      ++bi;
    } else if (kind == "stats") {
      std::vector<real> v(3);
      read_reals(in, v);
      auto& target = name == "norm.mean" ? stats.mean : stats.stddev;
      std::copy(v.begin(), v.end(), target.begin());
    } else {
      fail(ErrorCode::format, path + ": unknown tensor kind '" + kind + "'");
    }
    if (!in) fail(ErrorCode::format, path + ": truncated checkpoint payload");
  }
  if (pi != params.size() || bi != buffers.size())
    fail(ErrorCode::format, path + ": checkpoint is missing tensors");
  return loaded;
}

uint64_t state_checksum(FallDetectorNet& net) {
  uint64_t hash = 14695981039346656037ull;
  auto mix = [&hash](const std::vector<real>& values) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    const size_t n = values.size() * sizeof(real);
    for (size_t i = 0; i < n; ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ull;
    }
  };
  for (const auto& p : net.parameters()) mix(p.tensor.data());
  for (const auto& [name, vec] : net.buffers()) mix(*vec);
  const auto& stats = net.norm_stats();
  mix({stats.mean[0], stats.mean[1], stats.mean[2], stats.stddev[0], stats.stddev[1],
       stats.stddev[2]});
  return hash;
}

}  // namespace skelfall
