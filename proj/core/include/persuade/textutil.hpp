#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace persuade {

// Lowercase, split on non-alphanumerics, drop empties. No stemming or
// stopword removal, so tokenization stays reproducible across languages.
std::vector<std::string> tokenize(std::string_view text);

// Deterministic signed token-hash bag, L2-normalized. Stands in for a real
// embedding model in the mock and oracle backends: identical texts map to
// identical vectors and disjoint token sets decorrelate.
std::vector<float> hashing_embed(std::string_view text, std::size_t dim = 64);

double cosine(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace persuade
