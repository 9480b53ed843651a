#include "regionedit/prompt.hpp"

#include <cmath>
#include <sstream>

namespace regionedit {

namespace {

// Fixed stream per token spelling; independent of any run seed so the same
// word always embeds identically.
void token_vector(const std::string& token, double* out, int d) {
  Rng rng(fnv1a64("regionedit.text") ^ fnv1a64(token));
  double norm2 = 0.0;
  for (int i = 0; i < d; ++i) {
    out[i] = rng.gaussian();
    norm2 += out[i] * out[i];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (int i = 0; i < d; ++i) out[i] *= inv;
}

}  // namespace

PromptEmbedding embed_prompt(const std::vector<std::string>& tokens, int d_text) {
  if (tokens.empty()) throw ValidationError("empty prompt");
  PromptEmbedding out;
  out.tokens.reserve(tokens.size() + 2);
  out.tokens.push_back(kStartMarker);
  out.tokens.insert(out.tokens.end(), tokens.begin(), tokens.end());
  out.tokens.push_back(kEndMarker);
  out.matrix = Tensor::zeros({out.tokens.size(), static_cast<std::size_t>(d_text)});
  for (std::size_t i = 0; i < out.tokens.size(); ++i)
    token_vector(out.tokens[i], out.matrix.row(i), d_text);
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

}  // namespace regionedit
