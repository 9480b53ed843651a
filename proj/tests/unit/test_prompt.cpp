#include <doctest.h>

#include <cmath>

#include "regionedit/prompt.hpp"

using namespace regionedit;

TEST_SUITE_BEGIN("prompt");

TEST_CASE("same prompt embeds identically") {
  PromptEmbedding a = embed_prompt({"red", "square"});
  PromptEmbedding b = embed_prompt({"red", "square"});
  CHECK(a.matrix.data == b.matrix.data);
  CHECK(a.tokens == b.tokens);
}

TEST_CASE("markers wrap the sequence: single token gives length 3") {
  PromptEmbedding p = embed_prompt({"cat"});
  REQUIRE(p.length() == 3);
  CHECK(p.tokens.front() == kStartMarker);
  CHECK(p.tokens.back() == kEndMarker);
  CHECK(p.tokens[1] == "cat");
}

TEST_CASE("token vectors are unit norm") {
  PromptEmbedding p = embed_prompt({"a", "scene", "with", "red", "square"});
  for (std::size_t i = 0; i < p.matrix.rows(); ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < p.matrix.cols(); ++j) n2 += p.matrix.at(i, j) * p.matrix.at(i, j);
    CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("distinct words get distinct directions across the palette vocabulary") {
  const std::vector<std::string> words = {"red",  "green",  "blue",   "yellow", "magenta",
                                          "cyan", "orange", "white",  "square", "circle",
                                          "a",    "scene",  "with",   kStartMarker, kEndMarker};
  PromptEmbedding p = embed_prompt(words);  // markers in the list embed like any token
  for (std::size_t i = 0; i < p.matrix.rows(); ++i)
    for (std::size_t j = i + 1; j < p.matrix.rows(); ++j) {
      double cos = 0.0;
      for (std::size_t c = 0; c < p.matrix.cols(); ++c) cos += p.matrix.at(i, c) * p.matrix.at(j, c);
      if (p.tokens[i] != p.tokens[j]) CHECK(std::abs(cos) < 0.999999);
    }
}

TEST_CASE("same word embeds the same regardless of position") {
  PromptEmbedding a = embed_prompt({"red", "blue"});
  PromptEmbedding b = embed_prompt({"blue", "red"});
  for (std::size_t c = 0; c < a.matrix.cols(); ++c) {
    CHECK(a.matrix.at(1, c) == b.matrix.at(2, c));  // "red"
    CHECK(a.matrix.at(2, c) == b.matrix.at(1, c));  // "blue"
  }
}

TEST_CASE("empty prompt is rejected") {
  CHECK_THROWS_WITH_AS(embed_prompt({}), "empty prompt", ValidationError);
}

TEST_CASE("tokenize splits on any whitespace") {
  CHECK(tokenize("  red   square\tblue\ncircle ") ==
        std::vector<std::string>{"red", "square", "blue", "circle"});
  CHECK(tokenize("").empty());
}

TEST_SUITE_END();
