#ifndef SECLR_TEXT_HPP
#define SECLR_TEXT_HPP

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace seclr {

using StopwordSet = std::unordered_set<std::string>;

// Decodes UTF-8, throwing ParseError with the byte offset of the first
// invalid sequence (overlong forms, surrogates and values past U+10FFFF
// are rejected).
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(const std::u32string& s);

// Deterministic preprocessing pipeline applied to every text surface in
// the system (corpora, queries, documents): lowercase, typographic
// punctuation treated as delimiters, whitespace/punctuation
// tokenization, diacritic stripping (canonical decomposition of
// precomposed Latin letters followed by combining-mark removal; letters
// without a canonical decomposition such as "ø" pass through), stopword
// removal. Empty output is permitted.
std::vector<std::string> normalize_text(std::string_view raw,
                                        const StopwordSet& stopwords);

// One token per line; each line is itself normalized so matching is
// consistent with normalize_text output. An empty path yields an empty
// set; a configured-but-missing file is an error.
StopwordSet load_stopwords(const std::string& path);

}  // namespace seclr

#endif  // SECLR_TEXT_HPP
