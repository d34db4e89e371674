#pragma once

#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "advnav/diff/optim.hpp"
#include "advnav/diff/param_store.hpp"
#include "advnav/util.hpp"

namespace advnav::diff {

inline constexpr int kCheckpointVersion = 1;

/// Parameter checkpoint: one JSON header line followed by the raw
/// little-endian float64 payload of every parameter in name order. When Adam
/// state is present its first and second moments follow in the same order.
struct Checkpoint {
  ParamStore store;
  std::string tag;           // e.g. "mle-forecaster"
  nlohmann::json meta;       // model config and training provenance
  bool has_adam = false;
  AdamOptimizer adam;        // moments only meaningful when has_adam
};

namespace detail {

inline void append_doubles(std::string& out, const Mat& m) {
  // Column-major coefficient order, Eigen's native layout.
  const auto* p = reinterpret_cast<const char*>(m.data());
  out.append(p, static_cast<std::size_t>(m.size()) * sizeof(double));
}

inline Mat read_doubles(const std::string& buf, std::size_t& at,
                        Eigen::Index rows, Eigen::Index cols) {
  const std::size_t bytes =
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
  if (at + bytes > buf.size())
    throw std::runtime_error("checkpoint: truncated payload");
  Mat m(rows, cols);
  std::memcpy(m.data(), buf.data() + at, bytes);
  at += bytes;
  return m;
}

}  // namespace detail

inline std::string checkpoint_to_string(const Checkpoint& ckpt) {
  using nlohmann::json;
  json header;
  header["version"] = kCheckpointVersion;
  header["tag"] = ckpt.tag;
  header["seed"] = ckpt.store.seed();
  header["step"] = ckpt.store.step;
  json params = json::array();
  ckpt.store.for_each([&](const std::string& name, const Mat& v, const Mat&) {
    params.push_back({{"name", name}, {"rows", v.rows()}, {"cols", v.cols()}});
  });
  header["params"] = params;
  if (ckpt.has_adam) {
    header["adam"] = {{"t", ckpt.adam.t},
                      {"lr", ckpt.adam.lr},
                      {"beta1", ckpt.adam.beta1},
                      {"beta2", ckpt.adam.beta2},
                      {"eps", ckpt.adam.eps}};
  }
  if (!ckpt.meta.is_null()) header["meta"] = ckpt.meta;

  std::string out = header.dump();
  out += '\n';
  ckpt.store.for_each([&](const std::string&, const Mat& v, const Mat&) {
    detail::append_doubles(out, v);
  });
  if (ckpt.has_adam) {
    ckpt.store.for_each([&](const std::string& name, const Mat& v, const Mat&) {
      const auto it = ckpt.adam.m.find(name);
      detail::append_doubles(out, it != ckpt.adam.m.end()
                                       ? it->second
                                       : Mat::Zero(v.rows(), v.cols()).eval());
    });
    ckpt.store.for_each([&](const std::string& name, const Mat& v, const Mat&) {
      const auto it = ckpt.adam.v.find(name);
      detail::append_doubles(out, it != ckpt.adam.v.end()
                                       ? it->second
                                       : Mat::Zero(v.rows(), v.cols()).eval());
    });
  }
  return out;
}

inline Checkpoint checkpoint_from_string(const std::string& buf) {
  using nlohmann::json;
  const auto nl = buf.find('\n');
  if (nl == std::string::npos)
    throw std::runtime_error("checkpoint: missing header line");
  json header;
  try {
    header = json::parse(buf.substr(0, nl));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad header: ") + e.what());
  }
  const int version = header.value("version", -1);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));

  Checkpoint ckpt;
  ckpt.tag = header.value("tag", "");
  ckpt.store = ParamStore(header.value("seed", std::uint64_t{0}));
  ckpt.store.step = header.value("step", std::uint64_t{0});
  if (header.contains("meta")) ckpt.meta = header["meta"];

  std::size_t at = nl + 1;
  for (const auto& p : header.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    const auto rows = p.at("rows").get<Eigen::Index>();
    const auto cols = p.at("cols").get<Eigen::Index>();
    ckpt.store.add(name, detail::read_doubles(buf, at, rows, cols));
  }
  if (header.contains("adam")) {
    ckpt.has_adam = true;
    const auto& a = header["adam"];
    ckpt.adam.t = a.at("t").get<std::uint64_t>();
    ckpt.adam.lr = a.at("lr").get<double>();
    ckpt.adam.beta1 = a.at("beta1").get<double>();
    ckpt.adam.beta2 = a.at("beta2").get<double>();
    ckpt.adam.eps = a.at("eps").get<double>();
    ckpt.store.for_each([&](const std::string& name, const Mat& v, const Mat&) {
      ckpt.adam.m[name] = detail::read_doubles(buf, at, v.rows(), v.cols());
    });
    ckpt.store.for_each([&](const std::string& name, const Mat& v, const Mat&) {
      ckpt.adam.v[name] = detail::read_doubles(buf, at, v.rows(), v.cols());
    });
  }
  if (at != buf.size())
    throw std::runtime_error("checkpoint: trailing bytes in payload");
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt,
                            const std::filesystem::path& path) {
  atomic_write_file(path, checkpoint_to_string(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(read_file(path));
}

}  // namespace advnav::diff
