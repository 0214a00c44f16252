// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "symse/errors.hpp"

namespace symse::pipeline {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Array {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

template <typename T>
std::vector<float> to_f32(const std::vector<T>& v) {
  return std::vector<float>(v.begin(), v.end());
}

std::vector<Array> collect(const Checkpoint& c) {
  std::vector<Array> out;
  for (const auto& e : c.params.entries()) out.push_back({e.name, e.tensor.shape, e.tensor.values});
  if (c.book) {
    const auto& b = *c.book;
    const std::size_t M = b.config.size, D = b.config.dim;
    out.push_back({"vq.e", {M, D}, to_f32(b.prototypes)});
    out.push_back({"vq.N", {M}, to_f32(b.ema_counts)});
    out.push_back({"vq.m", {M, D}, to_f32(b.ema_sums)});
  }
  for (const auto& e : c.params.entries()) {
    auto it = c.adam.moments.find(e.name);
    if (it == c.adam.moments.end()) continue;
    out.push_back({"adam.m/" + e.name, e.tensor.shape, to_f32(it->second.m)});
    out.push_back({"adam.v/" + e.name, e.tensor.shape, to_f32(it->second.v)});
  }
  return out;
}

std::string shape_str(const ad::Shape& s) { return ad::to_string(s); }

ad::Shape shape_of(const json& j, const std::string& name) {
  if (!j.is_array()) throw DataError("checkpoint: array '" + name + "' has a malformed shape");
  ad::Shape s;
  for (const auto& d : j) s.push_back(d.get<std::size_t>());
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const fs::path& path) {
  const auto arrays = collect(c);
  json header;
  header["format"] = "symse-checkpoint";
  header["version"] = kCheckpointVersion;
  std::uint64_t offset = 0;
  json index = json::object();
  json order = json::array();
  for (const auto& a : arrays) {
    SYMSE_REQUIRE(a.values.size() == ad::numel(a.shape), "save_checkpoint: array " + a.name + " size mismatch");
    index[a.name] = {{"dtype", "f32"}, {"shape", a.shape}, {"offset", offset}};
    order.push_back(a.name);
    offset += a.values.size() * sizeof(float);
  }
  header["arrays"] = index;
  header["order"] = order;
  json meta;
  meta["config"] = config::flatten(c.config);
  meta["epoch"] = c.epoch;
  meta["best_valid"] = std::isfinite(c.best_valid) ? json(c.best_valid) : json(nullptr);
  meta["adam_step"] = c.adam.step;
  meta["has_book"] = c.book.has_value();
  if (c.book) meta["usage"] = c.book->usage;
  header["meta"] = meta;

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 8);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays)
    out.write(reinterpret_cast<const char*>(a.values.data()),
              static_cast<std::streamsize>(a.values.size() * sizeof(float)));
  out.close();
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint " + path.string() + ": ";
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw DataError(where + "bad magic (expected SYMSE001)");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw DataError(where + "truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw DataError(where + "malformed header: " + e.what());
  }
  if (header.value("version", -1) != kCheckpointVersion)
    throw DataError(where + "unsupported version " + header.value("version", json(-1)).dump());

  const char* payload = bytes.data() + 16 + len;
  const std::size_t payload_size = bytes.size() - 16 - len;

  Checkpoint c;
  try {
    const auto& meta = header.at("meta");
    c.config = config::unflatten(meta.at("config").get<std::map<std::string, std::string>>());
    c.epoch = meta.at("epoch").get<std::size_t>();
    c.best_valid = meta.at("best_valid").is_null() ? std::numeric_limits<double>::infinity()
                                                   : meta.at("best_valid").get<double>();
    c.adam.config = c.config.train.adam;
    c.adam.step = meta.at("adam_step").get<std::uint64_t>();

    // Read arrays in payload order so truncation names the first incomplete one.
    std::vector<std::pair<std::uint64_t, std::string>> by_offset;
    for (const auto& [name, a] : header.at("arrays").items()) by_offset.emplace_back(a.at("offset").get<std::uint64_t>(), name);
    std::sort(by_offset.begin(), by_offset.end());
    std::map<std::string, Array> arrays;
    for (const auto& [off, name] : by_offset) {
      const auto& a = header["arrays"][name];
      if (a.at("dtype") != "f32") throw DataError(where + "array '" + name + "' has unsupported dtype");
      Array arr{name, shape_of(a.at("shape"), name), {}};
      const std::size_t n = ad::numel(arr.shape);
      if (off > payload_size || n * sizeof(float) > payload_size - off)
        throw DataError(where + "truncated: array '" + name + "' is incomplete");
      arr.values.resize(n);
      std::memcpy(arr.values.data(), payload + off, n * sizeof(float));
      arrays.emplace(name, std::move(arr));
    }

    const auto take = [&](const std::string& name, const ad::Shape& shape) -> Array& {
      auto it = arrays.find(name);
      if (it == arrays.end()) throw DataError(where + "missing array '" + name + "'");
      if (it->second.shape != shape)
        throw DataError(where + "array '" + name + "' has shape " + shape_str(it->second.shape) + ", config expects " +
                        shape_str(shape));
      return it->second;
    };

    for (const auto& [name, shape] : model::parameter_layout(c.config.model)) {
      auto& a = take(name, shape);
      c.params.add(name, ad::Tensor<float>(shape, a.values));
      if (arrays.count("adam.m/" + name)) {
        ad::AdamState::Moments mo;
        const auto& m = take("adam.m/" + name, shape).values;
        const auto& v = take("adam.v/" + name, shape).values;
        mo.m.assign(m.begin(), m.end());
        mo.v.assign(v.begin(), v.end());
        c.adam.moments.emplace(name, std::move(mo));
      }
    }
    if (meta.at("has_book").get<bool>()) {
      const auto bc = c.config.model.book_config();
      vq::SymbolicBook b = vq::make_uniform_book(bc, 0);
      const auto& e = take("vq.e", {bc.size, bc.dim}).values;
      const auto& N = take("vq.N", {bc.size}).values;
      const auto& m = take("vq.m", {bc.size, bc.dim}).values;
      b.prototypes.assign(e.begin(), e.end());
      b.ema_counts.assign(N.begin(), N.end());
      b.ema_sums.assign(m.begin(), m.end());
      b.usage = meta.at("usage").get<std::vector<std::uint64_t>>();
      if (b.usage.size() != bc.size) throw DataError(where + "usage counts do not match vq.book_size");
      c.book = std::move(b);
    }
  } catch (const json::exception& e) {
    throw DataError(where + "malformed header: " + e.what());
  } catch (const ContractError& e) {
    throw DataError(where + "stored config is invalid: " + e.what());
  }
  return c;
}

Checkpoint load_checkpoint(const fs::path& path, const model::ModelConfig& expected) {
  auto c = load_checkpoint(path);
  const auto want = model::parameter_layout(expected.resolved());
  for (const auto& [name, shape] : want) {
    if (!c.params.contains(name))
      throw DataError("checkpoint " + path.string() + ": array '" + name + "' required by the config is missing");
    const auto& have = c.params.at(name).shape;
    if (have != shape)
      throw DataError("checkpoint " + path.string() + ": array '" + name + "' has shape " + shape_str(have) +
                      ", config expects " + shape_str(shape));
  }
  if (want.size() != c.params.size())
    throw DataError("checkpoint " + path.string() + ": holds " + std::to_string(c.params.size()) +
                    " parameter arrays, config expects " + std::to_string(want.size()));
  return c;
}

}  // namespace symse::pipeline
