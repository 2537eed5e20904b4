#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sitedetect {

// Main text of a page plus how much of it sits in links, list items and
// table cells. Character counts are Unicode code points of the normalized
// paragraphs; the "\n\n" joiners in main_text are not counted.
struct ExtractedContent {
  std::string main_text;
  std::vector<std::string> paragraphs;
  std::size_t total_chars = 0;
  std::size_t link_chars = 0;
  std::size_t list_chars = 0;
  std::size_t table_chars = 0;
  std::size_t word_count = 0;
  std::optional<std::string> title;
  std::optional<std::string> lang_hint;

  friend bool operator==(const ExtractedContent&, const ExtractedContent&) = default;
};

struct StructureRatios {
  double link = 0.0;
  double list = 0.0;
  double table = 0.0;
};

// chars / total_chars per counter; all zero for an empty document.
StructureRatios ratios(const ExtractedContent& content);

struct ExtractOptions {
  // Siblings of the winning block are kept when their score reaches this
  // fraction of the winner's.
  double sibling_fraction = 0.2;
  // Restrict candidates to <article> (else <main>) subtrees when present.
  bool use_landmarks = true;
};

// Decodes page bytes to UTF-8: BOM, then `charset_hint` (e.g. from the HTTP
// Content-Type), then UTF-8 itself, then a <meta> charset declaration.
// Throws EncodingError when none of these yields valid text.
std::string decode_html_bytes(std::string_view bytes, std::string_view charset_hint = {});

// Charset parameter of a Content-Type header value, if any.
std::optional<std::string> charset_from_content_type(std::string_view content_type);

// Main-content extraction with structural accounting.
//
// Boilerplate subtrees (script, style, nav, header, footer, aside, form and a
// few non-content elements) are dropped. Text is split into paragraphs at
// block boundaries. Each paragraph credits its nearest content container
// (a block that is not itself a paragraph-like or list/table structural
// element) in full and that container's parent container at half. A
// container scores T * (1 - L/T)^2 for credited text T and link text L. The
// best container's subtree is kept along with any sibling whose subtree
// scores at least `sibling_fraction` of the winner. When every container
// scores zero (all text is link text) the one with the most credited text wins.
//
// Within the kept paragraphs a character counts as link text when inside an
// <a>, list text when inside an <li>, and table text when inside a <td> or
// <th>; the three counters are independent.
ExtractedContent extract(std::string_view html_bytes, std::string_view charset_hint = {},
                         const ExtractOptions& options = {});

}  // namespace sitedetect
