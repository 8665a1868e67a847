#pragma once

#include <cstdint>
#include <string>

#include "persuade/corpus.hpp"
#include "persuade/oracle.hpp"

namespace persuade {

// Parameters for a seeded synthetic-persuadee world. Every user gets one
// instance whose delta comments target that user's latent attributes and
// whose leaking records mention them; everything else is filler.
struct WorldSpec {
  std::uint64_t seed = 1;
  int n_users = 10;
  int records_per_user = 50;
  int leaking_per_user = 3;
  int attrs_per_user = 2;
  int deltas_per_instance = 1;
  int nondeltas_per_instance = 2;
  // Records that leak the *next* user's attributes; non-delta comments then
  // target those, so profiles built from poison records cause false
  // positives and the records score low utility.
  int poison_per_user = 0;
  int degrade_every = 4;
};

struct SyntheticWorld {
  OracleWorld world;
  Corpus corpus;
};

SyntheticWorld make_world(const WorldSpec& spec);

// Writes world.json, threads.jsonl and histories.jsonl under `dir`.
void write_world_files(const SyntheticWorld& world, const std::string& dir);

}  // namespace persuade
