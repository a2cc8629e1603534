#pragma once

// JSON checkpoint holding both networks; the binary export format
// (write_weights) carries only the policy mean network.

#include "pgl/policy.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgl::runtime {

struct Checkpoint {
  std::string env;
  GaussianPolicy policy;
  DenseNet value_net;
  std::uint64_t version = 0;
};

namespace detail {

inline nlohmann::json net_to_json(const DenseNet& net) {
  return {{"layer_sizes", net.layer_sizes()},
          {"params", std::vector<double>(net.params().data(), net.params().data() + net.param_count())}};
}

inline DenseNet net_from_json(const nlohmann::json& j) {
  DenseNet net(j.at("layer_sizes").get<std::vector<int>>());
  const auto params = j.at("params").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(params.size()) != net.param_count())
    throw std::runtime_error("checkpoint: parameter count does not match layer sizes");
  net.params() = Eigen::Map<const Vec>(params.data(), net.param_count());
  return net;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const Vec& ls = ckpt.policy.log_std;
  nlohmann::json j = {{"env", ckpt.env},
                      {"version", ckpt.version},
                      {"policy", detail::net_to_json(ckpt.policy.mean_net)},
                      {"log_std", std::vector<double>(ls.data(), ls.data() + ls.size())},
                      {"value", detail::net_to_json(ckpt.value_net)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out << j.dump(1) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
    Checkpoint c;
    c.env = j.at("env").get<std::string>();
    c.version = j.at("version").get<std::uint64_t>();
    DenseNet mean = detail::net_from_json(j.at("policy"));
    const auto ls = j.at("log_std").get<std::vector<double>>();
    if (static_cast<int>(ls.size()) != mean.output_size())
      throw std::runtime_error("checkpoint: log_std size does not match action dimension");
    c.policy = GaussianPolicy(std::move(mean), Eigen::Map<const Vec>(ls.data(), static_cast<Eigen::Index>(ls.size())));
    c.value_net = detail::net_from_json(j.at("value"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint: malformed " + path + ": " + e.what());
  }
}

/// Loads a policy mean network from either a binary export or a JSON checkpoint.
inline DenseNet load_policy_weights(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot open weights file " + path);
  char first = 0;
  probe.get(first);
  if (first == '{') return load_checkpoint(path).policy.mean_net;
  return read_weights(path);
}

}  // namespace pgl::runtime
