#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "persuade/gateway.hpp"

namespace persuade {

// Synthetic-persuadee world: latent user attributes, per-record leaked
// attributes, and per-comment targeted attributes. Drives a deterministic
// backend so the whole pipeline can be verified offline.
struct OracleWorld {
  struct CommentSpec {
    std::vector<std::string> targets;
    int label = 0;
  };

  std::map<std::string, std::vector<std::string>> users;    // user_id -> attributes
  std::map<std::string, std::vector<std::string>> records;  // record_id -> leaked attributes
  std::map<std::string, CommentSpec> comments;
  // Sampled calls (temperature > 0) with seed % degrade_every ==
  // degrade_every - 1 produce a degraded completion (no-signal profile /
  // decoy query), giving candidate sets a score spread. 0 disables.
  int degrade_every = 4;

  std::set<std::string> attribute_vocab() const;

  void validate() const;  // throws InvalidWorld
  static OracleWorld load(const std::string& path);
  void save(const std::string& path) const;
};

// Validates the world file and returns a gateway config pointing at it.
BackendConfig oracle_backend(const std::string& world_path, int max_concurrency = 4);

std::unique_ptr<Backend> make_oracle_backend(const BackendConfig& config);

}  // namespace persuade
