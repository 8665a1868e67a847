#include "persuade/textutil.hpp"

#include <cctype>
#include <cmath>

#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"

namespace persuade {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<float> hashing_embed(std::string_view text, std::size_t dim) {
  if (dim == 0) raise(Errc::dimension_mismatch, "embedding dimension must be > 0");
  std::vector<float> vec(dim, 0.0f);
  for (const std::string& token : tokenize(text)) {
    std::uint64_t h = stable_hash(std::string_view("emb"), std::string_view(token));
    std::size_t idx = static_cast<std::size_t>(h % dim);
    float sign = ((h >> 32) & 1u) ? 1.0f : -1.0f;
    vec[idx] += sign;
  }
  double norm = 0.0;
  for (float v : vec) norm += static_cast<double>(v) * v;
  if (norm == 0.0) {
    vec[0] = 1.0f;  // token-free text still yields a unit vector
    return vec;
  }
  float inv = static_cast<float>(1.0 / std::sqrt(norm));
  for (float& v : vec) v *= inv;
  return vec;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size())
    raise(Errc::dimension_mismatch,
          std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace persuade
