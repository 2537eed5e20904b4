#include "sitedetect/content_extractor.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "sitedetect/errors.hpp"
#include "sitedetect/html_parser.hpp"
#include "sitedetect/text.hpp"

namespace sitedetect {

using html::Document;
using html::Node;
using html::NodeId;

StructureRatios ratios(const ExtractedContent& c) {
  if (c.total_chars == 0) return {};
  auto total = static_cast<double>(c.total_chars);
  return {static_cast<double>(c.link_chars) / total, static_cast<double>(c.list_chars) / total,
          static_cast<double>(c.table_chars) / total};
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string read_charset_token(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '"' || s[i] == '\'' || s[i] == '=')) ++i;
  std::size_t start = i;
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '-' || s[i] == '_' ||
                          s[i] == '.' || s[i] == ':')) {
    ++i;
  }
  return std::string(s.substr(start, i - start));
}

std::optional<std::string> sniff_meta_charset(std::string_view bytes) {
  std::string head = ascii_lower(bytes.substr(0, 8192));
  std::size_t pos = 0;
  while ((pos = head.find("<meta", pos)) != std::string::npos) {
    auto end = head.find('>', pos);
    if (end == std::string::npos) end = head.size();
    std::string_view tag(head.data() + pos, end - pos);
    if (auto cs = tag.find("charset"); cs != std::string_view::npos) {
      auto token = read_charset_token(tag.substr(cs + 7));
      if (!token.empty()) return token;
    }
    pos = end;
  }
  return std::nullopt;
}

bool is_utf8_name(std::string_view name) {
  auto n = ascii_lower(name);
  return n == "utf-8" || n == "utf8";
}

bool in(std::string_view tag, std::initializer_list<std::string_view> set) {
  return std::find(set.begin(), set.end(), tag) != set.end();
}

bool is_stripped_element(const Node& n) {
  if (in(n.tag, {"script", "style", "nav", "header", "footer", "aside", "form", "noscript", "template", "iframe",
                 "svg", "math", "head", "button", "select", "textarea", "object", "embed", "canvas", "title",
                 "dialog", "menu"})) {
    return true;
  }
  if (n.attribute("hidden") != nullptr) return true;
  if (const auto* aria = n.attribute("aria-hidden"); aria && ascii_lower(*aria) == "true") return true;
  return false;
}

bool is_block(std::string_view tag) {
  return in(tag, {"#document", "html",   "body",    "address", "article", "aside",    "blockquote", "center",
                  "dd",        "details", "dialog", "dir",     "div",     "dl",       "dt",         "fieldset",
                  "figcaption", "figure", "footer", "form",    "h1",      "h2",       "h3",         "h4",
                  "h5",        "h6",      "header", "hgroup",  "hr",      "li",       "main",       "menu",
                  "nav",       "ol",      "p",      "pre",     "section", "summary",  "table",      "tbody",
                  "td",        "tfoot",   "th",     "thead",   "tr",      "ul",       "caption",    "legend",
                  "option",    "optgroup"});
}

// Blocks that hold a paragraph's worth of text rather than a content region.
bool is_text_block(std::string_view tag) {
  return in(tag, {"p", "h1", "h2", "h3", "h4", "h5", "h6", "li", "dt", "dd", "td", "th", "pre", "blockquote",
                  "figcaption", "caption", "address", "summary", "legend"});
}

bool is_structural(std::string_view tag) {
  return in(tag, {"ul", "ol", "dl", "dir", "table", "thead", "tbody", "tfoot", "tr"});
}

enum Flag : std::uint8_t { kLink = 1, kList = 2, kTable = 4 };

struct Paragraph {
  NodeId owner = 0;
  std::u32string text;
  std::vector<std::uint8_t> flags;
};

class Walker {
 public:
  explicit Walker(const Document& doc) : doc_(doc), removed_(doc.size(), false) {}

  std::vector<Paragraph> run() {
    owners_.push_back(doc_.root());
    walk(doc_.root(), 0);
    flush();
    return std::move(paragraphs_);
  }

  const std::vector<bool>& removed() const { return removed_; }

 private:
  void walk(NodeId id, std::uint8_t flags) {
    const Node& n = doc_.node(id);
    if (!n.is_element()) {
      for (char32_t c : utf8_to_u32(nfc(n.text))) {
        buffer_.push_back(c);
        buffer_flags_.push_back(flags);
      }
      return;
    }
    if (id != doc_.root() && is_stripped_element(n)) {
      mark_removed(id);
      return;
    }
    if (n.tag == "br" || n.tag == "img" || n.tag == "hr") {
      buffer_.push_back(U' ');
      buffer_flags_.push_back(flags);
      if (n.tag != "hr") return;
    }
    std::uint8_t inner = flags;
    if (n.tag == "a") inner |= kLink;
    if (n.tag == "li") inner |= kList;
    if (n.tag == "td" || n.tag == "th") inner |= kTable;

    bool block = is_block(n.tag);
    if (block) {
      flush();
      owners_.push_back(id);
    }
    for (NodeId child : n.children) walk(child, inner);
    if (block) {
      flush();
      owners_.pop_back();
    }
  }

  void mark_removed(NodeId id) {
    removed_[id] = true;
    for (NodeId child : doc_.node(id).children) mark_removed(child);
  }

  // Whitespace runs collapse to one space carrying the flags of the run's
  // first character; leading and trailing whitespace is dropped.
  void flush() {
    Paragraph p;
    p.owner = owners_.back();
    bool pending = false;
    std::uint8_t pending_flags = 0;
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
      char32_t c = buffer_[i];
      if (is_unicode_space(c)) {
        if (!pending) pending_flags = buffer_flags_[i];
        pending = true;
        continue;
      }
      if (is_stripped_char(c)) continue;
      if (pending && !p.text.empty()) {
        p.text.push_back(U' ');
        p.flags.push_back(pending_flags);
      }
      pending = false;
      p.text.push_back(c);
      p.flags.push_back(buffer_flags_[i]);
    }
    buffer_.clear();
    buffer_flags_.clear();
    if (!p.text.empty()) paragraphs_.push_back(std::move(p));
  }

  const Document& doc_;
  std::vector<bool> removed_;
  std::vector<NodeId> owners_;
  std::u32string buffer_;
  std::vector<std::uint8_t> buffer_flags_;
  std::vector<Paragraph> paragraphs_;
};

struct Tally {
  double text = 0.0;
  double links = 0.0;

  double score() const {
    if (text <= 0.0) return 0.0;
    double density = links / text;
    return text * (1.0 - density) * (1.0 - density);
  }
};

std::size_t count_flag(const Paragraph& p, std::uint8_t flag) {
  return static_cast<std::size_t>(std::count_if(p.flags.begin(), p.flags.end(), [&](auto f) { return (f & flag) != 0; }));
}

}  // namespace

std::optional<std::string> charset_from_content_type(std::string_view content_type) {
  std::string lowered = ascii_lower(content_type);
  auto pos = lowered.find("charset");
  if (pos == std::string::npos) return std::nullopt;
  auto token = read_charset_token(std::string_view(lowered).substr(pos + 7));
  if (token.empty()) return std::nullopt;
  return token;
}

std::string decode_html_bytes(std::string_view bytes, std::string_view charset_hint) {
  if (bytes.starts_with("\xEF\xBB\xBF")) {
    bytes.remove_prefix(3);
    if (!is_valid_utf8(bytes)) throw Error(ErrorCode::kEncodingError, "invalid UTF-8 after BOM");
    return std::string(bytes);
  }
  if (bytes.starts_with("\xFF\xFE") || bytes.starts_with("\xFE\xFF")) {
    auto decoded = transcode_to_utf8(bytes.substr(2), bytes[0] == '\xFF' ? "UTF-16LE" : "UTF-16BE");
    if (!decoded) throw Error(ErrorCode::kEncodingError, "invalid UTF-16 payload");
    return *decoded;
  }
  if (!charset_hint.empty() && !is_utf8_name(charset_hint)) {
    if (auto decoded = transcode_to_utf8(bytes, charset_hint)) return *decoded;
  }
  if (is_valid_utf8(bytes)) return std::string(bytes);
  if (auto meta = sniff_meta_charset(bytes); meta && !is_utf8_name(*meta)) {
    if (auto decoded = transcode_to_utf8(bytes, *meta)) return *decoded;
    throw Error(ErrorCode::kEncodingError, "bytes do not decode as declared charset " + *meta);
  }
  throw Error(ErrorCode::kEncodingError, "bytes are not valid UTF-8 and declare no usable charset");
}

ExtractedContent extract(std::string_view html_bytes, std::string_view charset_hint, const ExtractOptions& options) {
  std::string utf8 = decode_html_bytes(html_bytes, charset_hint);
  Document doc = Document::parse(utf8);

  ExtractedContent out;
  if (auto title = doc.find_first("title")) {
    std::string text;
    for (NodeId child : doc.node(*title).children) text += doc.node(child).text;
    std::string normalized = normalize_text(text);
    std::replace(normalized.begin(), normalized.end(), '\n', ' ');
    if (!normalized.empty()) out.title = normalized;
  }
  if (auto root = doc.find_first("html")) {
    if (const auto* lang = doc.node(*root).attribute("lang"); lang && !lang->empty()) out.lang_hint = *lang;
  }

  Walker walker(doc);
  std::vector<Paragraph> paragraphs = walker.run();
  const auto& removed = walker.removed();
  if (paragraphs.empty()) return out;

  // Landmark scope; node ids are in document order, so parents precede children.
  std::vector<bool> in_scope(doc.size(), true);
  if (options.use_landmarks) {
    for (std::string_view landmark : {"article", "main"}) {
      std::vector<bool> scope(doc.size(), false);
      bool found = false;
      for (NodeId id = 1; id < doc.size(); ++id) {
        const Node& n = doc.node(id);
        scope[id] = scope[n.parent] || (n.is_element() && n.tag == landmark && !removed[id]);
      }
      for (const auto& p : paragraphs) found = found || scope[p.owner];
      if (found) {
        in_scope = std::move(scope);
        break;
      }
    }
  }

  auto container_of = [&](NodeId id) {
    while (id != doc.root()) {
      const auto& tag = doc.node(id).tag;
      if (!is_text_block(tag) && !is_structural(tag)) break;
      id = doc.node(id).parent;
    }
    return id;
  };

  std::unordered_map<NodeId, Tally> tallies;
  for (const auto& p : paragraphs) {
    if (!in_scope[p.owner]) continue;
    auto len = static_cast<double>(p.text.size());
    auto links = static_cast<double>(count_flag(p, kLink));
    NodeId c = container_of(p.owner);
    tallies[c].text += len;
    tallies[c].links += links;
    if (c != doc.root()) {
      NodeId parent = container_of(doc.node(c).parent);
      if (in_scope[parent]) {
        tallies[parent].text += len / 2;
        tallies[parent].links += links / 2;
      }
    }
  }

  NodeId winner = html::kNoNode;
  double best = 0.0;
  for (const auto& [id, tally] : tallies) {
    double s = tally.score();
    if (s > best || (s == best && s > 0.0 && id < winner)) {
      best = s;
      winner = id;
    }
  }
  // A page made only of link text scores zero everywhere; keep the container
  // with the most credited text so its structure is still measured.
  if (winner == html::kNoNode) {
    double most = 0.0;
    for (const auto& [id, tally] : tallies) {
      if (tally.text > most || (tally.text == most && tally.text > 0.0 && id < winner)) {
        most = tally.text;
        winner = id;
      }
    }
  }
  if (winner == html::kNoNode) return out;

  // Subtree tallies: every in-scope paragraph credits all of its ancestors.
  std::vector<Tally> subtree(doc.size());
  for (const auto& p : paragraphs) {
    if (!in_scope[p.owner]) continue;
    auto len = static_cast<double>(p.text.size());
    auto links = static_cast<double>(count_flag(p, kLink));
    for (NodeId cur = p.owner;; cur = doc.node(cur).parent) {
      subtree[cur].text += len;
      subtree[cur].links += links;
      if (cur == doc.root()) break;
    }
  }

  std::vector<bool> kept(doc.size(), false);
  kept[winner] = true;
  if (winner != doc.root()) {
    for (NodeId sibling : doc.node(doc.node(winner).parent).children) {
      if (sibling == winner || !doc.node(sibling).is_element() || removed[sibling] || !in_scope[sibling]) continue;
      double s = subtree[sibling].score();
      if (s > 0.0 && s >= options.sibling_fraction * best) kept[sibling] = true;
    }
  }
  for (NodeId id = 1; id < doc.size(); ++id) kept[id] = kept[id] || kept[doc.node(id).parent];

  for (const auto& p : paragraphs) {
    if (!in_scope[p.owner] || !kept[p.owner]) continue;
    out.total_chars += p.text.size();
    out.link_chars += count_flag(p, kLink);
    out.list_chars += count_flag(p, kList);
    out.table_chars += count_flag(p, kTable);
    out.paragraphs.push_back(u32_to_utf8(p.text));
  }
  for (const auto& text : out.paragraphs) {
    if (!out.main_text.empty()) out.main_text += "\n\n";
    out.main_text += text;
    out.word_count += count_words(text);
  }
  return out;
}

}  // namespace sitedetect
