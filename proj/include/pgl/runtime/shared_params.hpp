#pragma once

// Single-writer parameter store. Each commit publishes an immutable snapshot
// tagged with a version and a checksum; readers take a reference to one
// whole snapshot and verify the checksum on read.

#include "pgl/policy.hpp"

#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>

namespace pgl::runtime {

class TornReadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamSnapshot {
  GaussianPolicy policy;
  DenseNet value_net;
  std::uint64_t version = 0;
  std::uint64_t checksum = 0;
};

/// FNV-1a over the raw bytes of every parameter and the version.
inline std::uint64_t snapshot_checksum(const GaussianPolicy& policy, const DenseNet& value_net, std::uint64_t version) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  mix(policy.mean_net.params().data(), sizeof(double) * policy.mean_net.param_count());
  mix(policy.log_std.data(), sizeof(double) * policy.log_std.size());
  mix(value_net.params().data(), sizeof(double) * value_net.param_count());
  mix(&version, sizeof(version));
  return h;
}

class SharedParams {
 public:
  SharedParams(GaussianPolicy policy, DenseNet value_net) {
    auto snap = std::make_shared<ParamSnapshot>();
    snap->policy = std::move(policy);
    snap->value_net = std::move(value_net);
    snap->checksum = snapshot_checksum(snap->policy, snap->value_net, 0);
    current_ = std::move(snap);
  }

  /// A consistent (parameters, version) pair. Throws TornReadError if the
  /// stored checksum does not match the contents.
  std::shared_ptr<const ParamSnapshot> read() const {
    std::shared_ptr<const ParamSnapshot> snap;
    {
      std::lock_guard lock(mutex_);
      snap = current_;
    }
    if (snapshot_checksum(snap->policy, snap->value_net, snap->version) != snap->checksum)
      throw TornReadError("SharedParams: snapshot checksum mismatch at version " + std::to_string(snap->version));
    return snap;
  }

  /// Publishes new parameters as version + 1.
  std::uint64_t commit(GaussianPolicy policy, DenseNet value_net) {
    auto snap = std::make_shared<ParamSnapshot>();
    snap->policy = std::move(policy);
    snap->value_net = std::move(value_net);
    std::lock_guard lock(mutex_);
    snap->version = current_->version + 1;
    snap->checksum = snapshot_checksum(snap->policy, snap->value_net, snap->version);
    current_ = std::move(snap);
    return current_->version;
  }

  std::uint64_t version() const {
    std::lock_guard lock(mutex_);
    return current_->version;
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ParamSnapshot> current_;
};

}  // namespace pgl::runtime
