// Copyright 2026 The ProFTAP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROFTAP_UTF8_H_
#define PROFTAP_UTF8_H_

#include <cstddef>
#include <string>
#include <string_view>

namespace proftap::utf8 {

// Decodes UTF-8 into Unicode scalar values. Throws ValidationError on
// malformed input (overlong forms, surrogates, truncated sequences).
std::u32string Decode(std::string_view text);

std::string Encode(std::u32string_view text);
std::string Encode(char32_t c);

// Number of scalar values; throws on malformed input.
std::size_t Length(std::string_view text);

bool IsCjkIdeograph(char32_t c);

// CJK symbols and punctuation plus the full-width ASCII variants block.
bool IsCjkPunctuation(char32_t c);

// Whitespace of any script, including U+3000 IDEOGRAPHIC SPACE.
bool IsSpace(char32_t c);

// ASCII punctuation, general punctuation, CJK punctuation, full-width
// punctuation and a handful of Latin-1 marks (middle dot, guillemets).
bool IsPunctuation(char32_t c);

inline bool IsPunctuationOrSpace(char32_t c) {
  return IsPunctuation(c) || IsSpace(c);
}

}  // namespace proftap::utf8

#endif  // PROFTAP_UTF8_H_
