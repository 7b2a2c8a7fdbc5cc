#include "msp/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "msp/core/error.hpp"

namespace msp {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'P', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const uint32_t n = read_pod<uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError("checkpoint: truncated string");
  return s;
}

void write_tensor(std::ofstream& out, const nn::Tensor& t) {
  write_pod<uint32_t>(out, static_cast<uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) write_pod<int32_t>(out, t.dim(i));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

nn::Tensor read_tensor(std::ifstream& in) {
  const uint32_t ndim = read_pod<uint32_t>(in);
  std::vector<int> shape;
  for (uint32_t i = 0; i < ndim; ++i) shape.push_back(read_pod<int32_t>(in));
  nn::Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
  if (!in) throw DataError("checkpoint: truncated tensor data");
  return t;
}

void write_tensor_map(std::ofstream& out,
                      const std::map<std::string, nn::Tensor>& m) {
  write_pod<uint32_t>(out, static_cast<uint32_t>(m.size()));
  for (const auto& [name, tensor] : m) {
    write_string(out, name);
    write_tensor(out, tensor);
  }
}

void read_tensor_map_into(std::ifstream& in,
                          std::map<std::string, nn::Tensor>& m,
                          bool require_match, const char* section) {
  const uint32_t count = read_pod<uint32_t>(in);
  std::map<std::string, nn::Tensor> loaded;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    loaded.emplace(std::move(name), read_tensor(in));
  }
  if (require_match) {
    if (loaded.size() != m.size()) {
      throw DataError(std::string("checkpoint: ") + section + " holds " +
                      std::to_string(loaded.size()) + " entries, model has " +
                      std::to_string(m.size()));
    }
    for (auto& [name, tensor] : loaded) {
      auto it = m.find(name);
      if (it == m.end()) {
        throw DataError(std::string("checkpoint: unexpected ") + section +
                        " entry '" + name + "'");
      }
      if (!it->second.same_shape(tensor)) {
        throw DataError(std::string("checkpoint: shape mismatch for '") +
                        name + "'");
      }
    }
  }
  m = std::move(loaded);
}

}  // namespace

void save_checkpoint(const std::string& path, const ReidModel& model,
                     const nn::Adam* optimizer, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint64_t>(out, meta.config_hash);
  write_pod<int64_t>(out, meta.epoch);

  write_tensor_map(out, model.params());

  auto& bn = const_cast<ReidModel&>(model).bn_states();
  write_pod<uint32_t>(out, static_cast<uint32_t>(bn.size()));
  for (const auto& [name, state] : bn) {
    write_string(out, name);
    write_tensor(out, state.running_mean);
    write_tensor(out, state.running_var);
    write_pod<int64_t>(out, state.batches_seen);
  }

  const uint8_t has_opt = optimizer != nullptr ? 1 : 0;
  write_pod<uint8_t>(out, has_opt);
  if (optimizer != nullptr) {
    auto* opt = const_cast<nn::Adam*>(optimizer);
    write_pod<int64_t>(out, opt->steps_taken());
    write_tensor_map(out, opt->first_moments());
    write_tensor_map(out, opt->second_moments());
  }
  if (!out) throw DataError("checkpoint: write failed: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, ReidModel& model,
                               nn::Adam* optimizer, uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("checkpoint: bad magic in " + path);
  }
  CheckpointMeta meta;
  meta.config_hash = read_pod<uint64_t>(in);
  meta.epoch = read_pod<int64_t>(in);
  if (expected_hash != 0 && meta.config_hash != expected_hash) {
    throw ConfigError(
        "checkpoint was produced under a different configuration (hash " +
        std::to_string(meta.config_hash) + ", expected " +
        std::to_string(expected_hash) +
        "); re-run with the matching config or retrain");
  }

  read_tensor_map_into(in, model.params(), true, "parameter section");

  const uint32_t bn_count = read_pod<uint32_t>(in);
  auto& bn = model.bn_states();
  if (bn_count != bn.size()) {
    throw DataError("checkpoint: batch-norm section size mismatch");
  }
  for (uint32_t i = 0; i < bn_count; ++i) {
    const std::string name = read_string(in);
    auto it = bn.find(name);
    if (it == bn.end()) {
      throw DataError("checkpoint: unknown batch-norm state '" + name + "'");
    }
    it->second.running_mean = read_tensor(in);
    it->second.running_var = read_tensor(in);
    it->second.batches_seen = read_pod<int64_t>(in);
  }

  const uint8_t has_opt = read_pod<uint8_t>(in);
  if (has_opt && optimizer != nullptr) {
    optimizer->set_steps_taken(read_pod<int64_t>(in));
    read_tensor_map_into(in, optimizer->first_moments(), false, "adam m");
    read_tensor_map_into(in, optimizer->second_moments(), false, "adam v");
  }
  return meta;
}

}  // namespace msp
