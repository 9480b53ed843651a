#pragma once

#include <map>
#include <string>
#include <vector>

#include "regionedit/layout.hpp"
#include "regionedit/tensor.hpp"

namespace regionedit {

inline constexpr int kTextDim = 32;
inline constexpr const char* kStartMarker = "<start>";
inline constexpr const char* kEndMarker = "<end>";

// Deterministic stand-in for a text encoder: every token maps to a fixed
// unit-norm vector derived from a hash of its spelling, start/end markers
// included. region_spans locates each region's words in the sequence and is
// filled by whoever assembles the sequence.
struct PromptEmbedding {
  std::vector<std::string> tokens;  // with markers
  Tensor matrix;                    // L x d_text
  std::map<int, TokenSpan> region_spans;

  int length() const { return static_cast<int>(tokens.size()); }
};

PromptEmbedding embed_prompt(const std::vector<std::string>& tokens, int d_text = kTextDim);

// Whitespace tokenizer for prompt strings from configs.
std::vector<std::string> tokenize(const std::string& text);

}  // namespace regionedit
