#include "sitedetect/html_parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

namespace sitedetect::html {
namespace {

void append_utf8(std::string& out, char32_t cp) {
  if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) || cp == 0) cp = 0xFFFD;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

const std::unordered_map<std::string_view, char32_t>& entity_table() {
  static const auto* table = [] {
    auto* t = new std::unordered_map<std::string_view, char32_t>{
        {"quot", 34},     {"amp", 38},      {"apos", 39},     {"lt", 60},       {"gt", 62},
        {"OElig", 338},   {"oelig", 339},   {"Scaron", 352},  {"scaron", 353},  {"Yuml", 376},
        {"fnof", 402},    {"circ", 710},    {"tilde", 732},   {"ensp", 8194},   {"emsp", 8195},
        {"thinsp", 8201}, {"zwnj", 8204},   {"zwj", 8205},    {"lrm", 8206},    {"rlm", 8207},
        {"ndash", 8211},  {"mdash", 8212},  {"lsquo", 8216},  {"rsquo", 8217},  {"sbquo", 8218},
        {"ldquo", 8220},  {"rdquo", 8221},  {"bdquo", 8222},  {"dagger", 8224}, {"Dagger", 8225},
        {"bull", 8226},   {"hellip", 8230}, {"permil", 8240}, {"prime", 8242},  {"Prime", 8243},
        {"lsaquo", 8249}, {"rsaquo", 8250}, {"euro", 8364},   {"trade", 8482},  {"larr", 8592},
        {"uarr", 8593},   {"rarr", 8594},   {"darr", 8595},   {"harr", 8596},   {"hearts", 9829},
        {"alpha", 945},   {"beta", 946},    {"gamma", 947},   {"delta", 948},   {"mu", 956},
        {"pi", 960},      {"sigma", 963},   {"omega", 969},   {"minus", 8722},  {"le", 8804},
        {"ge", 8805},     {"ne", 8800},     {"infin", 8734},  {"check", 10003}, {"star", 9734},
    };
    static constexpr std::array<std::string_view, 96> kLatin1 = {
        "nbsp",   "iexcl",  "cent",   "pound",  "curren", "yen",    "brvbar", "sect",   "uml",    "copy",
        "ordf",   "laquo",  "not",    "shy",    "reg",    "macr",   "deg",    "plusmn", "sup2",   "sup3",
        "acute",  "micro",  "para",   "middot", "cedil",  "sup1",   "ordm",   "raquo",  "frac14", "frac12",
        "frac34", "iquest", "Agrave", "Aacute", "Acirc",  "Atilde", "Auml",   "Aring",  "AElig",  "Ccedil",
        "Egrave", "Eacute", "Ecirc",  "Euml",   "Igrave", "Iacute", "Icirc",  "Iuml",   "ETH",    "Ntilde",
        "Ograve", "Oacute", "Ocirc",  "Otilde", "Ouml",   "times",  "Oslash", "Ugrave", "Uacute", "Ucirc",
        "Uuml",   "Yacute", "THORN",  "szlig",  "agrave", "aacute", "acirc",  "atilde", "auml",   "aring",
        "aelig",  "ccedil", "egrave", "eacute", "ecirc",  "euml",   "igrave", "iacute", "icirc",  "iuml",
        "eth",    "ntilde", "ograve", "oacute", "ocirc",  "otilde", "ouml",   "divide", "oslash", "ugrave",
        "uacute", "ucirc",  "uuml",   "yacute", "thorn",  "yuml"};
    for (std::size_t i = 0; i < kLatin1.size(); ++i) t->emplace(kLatin1[i], static_cast<char32_t>(160 + i));
    return t;
  }();
  return *table;
}

// Windows-1252 remapping of C1 numeric references, as browsers do.
char32_t remap_c1(char32_t cp) {
  static constexpr std::array<char32_t, 32> kMap = {
      0x20AC, 0x81,   0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021, 0x02C6, 0x2030, 0x0160,
      0x2039, 0x0152, 0x8D,   0x017D, 0x8F,   0x90,   0x2018, 0x2019, 0x201C, 0x201D, 0x2022,
      0x2013, 0x2014, 0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0x9D,   0x017E, 0x0178};
  if (cp >= 0x80 && cp <= 0x9F) return kMap[cp - 0x80];
  return cp;
}

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool in(std::string_view tag, std::initializer_list<std::string_view> set) {
  return std::find(set.begin(), set.end(), tag) != set.end();
}

bool closes_paragraph(std::string_view tag) {
  return in(tag, {"address", "article", "aside",  "blockquote", "center", "details", "dialog", "dir",    "div",
                  "dl",      "fieldset", "figcaption", "figure", "footer", "form",   "h1",     "h2",     "h3",
                  "h4",      "h5",     "h6",     "header", "hgroup", "hr",     "li",     "main",   "menu",
                  "nav",     "ol",     "p",      "pre",    "section", "summary", "table", "ul",     "dd",
                  "dt"});
}

bool is_inline_for_scope(std::string_view tag) {
  return in(tag, {"a", "abbr", "b", "bdi", "bdo", "cite", "code", "data", "dfn", "em", "font", "i", "kbd",
                  "mark", "q", "s", "samp", "small", "span", "strong", "sub", "sup", "time", "u", "var",
                  "label", "big", "tt", "strike", "nobr"});
}

bool is_raw_text(std::string_view tag) {
  return in(tag, {"script", "style", "xmp", "iframe", "noembed", "noframes", "noscript"});
}

bool is_rcdata(std::string_view tag) { return in(tag, {"title", "textarea"}); }

}  // namespace

const std::string* Node::attribute(std::string_view name) const {
  for (const auto& [k, v] : attributes) {
    if (k == name) return &v;
  }
  return nullptr;
}

bool is_void_element(std::string_view tag) {
  return in(tag, {"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
                  "track", "wbr", "keygen"});
}

std::string decode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  const auto& table = entity_table();
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c != '&') {
      out += c;
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (j < text.size() && text[j] == '#') {
      ++j;
      int base = 10;
      if (j < text.size() && (text[j] == 'x' || text[j] == 'X')) {
        base = 16;
        ++j;
      }
      std::size_t start = j;
      while (j < text.size() && (base == 16 ? std::isxdigit(static_cast<unsigned char>(text[j]))
                                            : std::isdigit(static_cast<unsigned char>(text[j])))) {
        ++j;
      }
      if (j == start) {
        out += '&';
        ++i;
        continue;
      }
      std::uint64_t value = 0;
      auto digits = text.substr(start, std::min<std::size_t>(j - start, 8));
      std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
      if (j - start > 8) value = 0x110000;
      if (j < text.size() && text[j] == ';') ++j;
      append_utf8(out, remap_c1(static_cast<char32_t>(std::min<std::uint64_t>(value, 0x110000))));
      i = j;
      continue;
    }
    std::size_t start = j;
    while (j < text.size() && j - start < 32 && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view name = text.substr(start, j - start);
    bool has_semicolon = j < text.size() && text[j] == ';';
    auto it = table.find(name);
    if (it != table.end() && (has_semicolon || in(name, {"amp", "lt", "gt", "quot", "nbsp", "copy", "reg"}))) {
      append_utf8(out, it->second);
      i = has_semicolon ? j + 1 : j;
      continue;
    }
    out += '&';
    ++i;
  }
  return out;
}

class TreeBuilder {
 public:
  explicit TreeBuilder(std::string_view input) : input_(input) {
    Node root;
    root.tag = "#document";
    doc_.nodes_.push_back(std::move(root));
    stack_.push_back(0);
  }

  Document build() {
    while (pos_ < input_.size()) {
      auto lt = input_.find('<', pos_);
      if (lt == std::string_view::npos) {
        text(input_.substr(pos_));
        break;
      }
      if (lt > pos_) text(input_.substr(pos_, lt - pos_));
      pos_ = lt;
      markup();
    }
    return std::move(doc_);
  }

 private:
  NodeId current() const { return stack_.back(); }

  NodeId add_node(Node node) {
    auto id = static_cast<NodeId>(doc_.nodes_.size());
    node.parent = current();
    doc_.nodes_.push_back(std::move(node));
    doc_.nodes_[current()].children.push_back(id);
    return id;
  }

  void append_text(std::string decoded) {
    if (decoded.empty()) return;
    auto& kids = doc_.nodes_[current()].children;
    if (!kids.empty() && doc_.nodes_[kids.back()].kind == Node::Kind::kText) {
      doc_.nodes_[kids.back()].text += decoded;
      return;
    }
    Node node;
    node.kind = Node::Kind::kText;
    node.text = std::move(decoded);
    add_node(std::move(node));
  }

  void text(std::string_view raw) { append_text(decode_entities(raw)); }

  void markup() {
    std::string_view rest = input_.substr(pos_);
    if (rest.starts_with("<!--")) {
      auto end = input_.find("-->", pos_ + 4);
      pos_ = end == std::string_view::npos ? input_.size() : end + 3;
      return;
    }
    if (rest.starts_with("<!") || rest.starts_with("<?")) {
      auto end = input_.find('>', pos_);
      pos_ = end == std::string_view::npos ? input_.size() : end + 1;
      return;
    }
    if (rest.starts_with("</")) {
      if (rest.size() > 2 && is_ascii_alpha(rest[2])) {
        std::size_t p = pos_ + 2;
        std::size_t start = p;
        while (p < input_.size() && !is_space(input_[p]) && input_[p] != '/' && input_[p] != '>') ++p;
        std::string name = lower(input_.substr(start, p - start));
        auto end = input_.find('>', p);
        pos_ = end == std::string_view::npos ? input_.size() : end + 1;
        end_tag(name);
      } else {
        auto end = input_.find('>', pos_);
        pos_ = end == std::string_view::npos ? input_.size() : end + 1;
      }
      return;
    }
    if (rest.size() > 1 && is_ascii_alpha(rest[1])) {
      start_tag_token();
      return;
    }
    text("<");
    ++pos_;
  }

  void start_tag_token() {
    std::size_t p = pos_ + 1;
    std::size_t start = p;
    while (p < input_.size() && !is_space(input_[p]) && input_[p] != '/' && input_[p] != '>') ++p;
    std::string name = lower(input_.substr(start, p - start));
    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    while (p < input_.size()) {
      while (p < input_.size() && (is_space(input_[p]) || input_[p] == '/')) {
        if (input_[p] == '/') self_closing = true;
        ++p;
      }
      if (p >= input_.size() || input_[p] == '>') break;
      self_closing = false;
      std::size_t name_start = p;
      while (p < input_.size() && !is_space(input_[p]) && input_[p] != '/' && input_[p] != '>' && input_[p] != '=') ++p;
      if (p == name_start) ++p;  // stray '=' without a name
      std::string attr_name = lower(input_.substr(name_start, p - name_start));
      std::size_t q = p;
      while (q < input_.size() && is_space(input_[q])) ++q;
      std::string value;
      if (q < input_.size() && input_[q] == '=') {
        ++q;
        while (q < input_.size() && is_space(input_[q])) ++q;
        if (q < input_.size() && (input_[q] == '"' || input_[q] == '\'')) {
          char quote = input_[q++];
          auto close = input_.find(quote, q);
          if (close == std::string_view::npos) close = input_.size();
          value = decode_entities(input_.substr(q, close - q));
          q = std::min(close + 1, input_.size());
        } else {
          std::size_t vstart = q;
          while (q < input_.size() && !is_space(input_[q]) && input_[q] != '>') ++q;
          value = decode_entities(input_.substr(vstart, q - vstart));
        }
        p = q;
      }
      if (!attr_name.empty() && attr_name != "=" &&
          std::none_of(attrs.begin(), attrs.end(), [&](const auto& a) { return a.first == attr_name; })) {
        attrs.emplace_back(std::move(attr_name), std::move(value));
      }
    }
    pos_ = p < input_.size() ? p + 1 : input_.size();
    start_tag(name, std::move(attrs), self_closing);
  }

  std::optional<std::size_t> find_open(std::string_view tag, std::initializer_list<std::string_view> stop) const {
    for (std::size_t i = stack_.size() - 1; i > 0; --i) {
      const auto& t = doc_.nodes_[stack_[i]].tag;
      if (t == tag) return i;
      if (in(t, stop)) return std::nullopt;
    }
    return std::nullopt;
  }

  void pop_to(std::size_t index) { stack_.resize(index); }

  void close_paragraph() {
    for (std::size_t i = stack_.size() - 1; i > 0; --i) {
      const auto& t = doc_.nodes_[stack_[i]].tag;
      if (t == "p") {
        pop_to(i);
        return;
      }
      if (!is_inline_for_scope(t)) return;
    }
  }

  void start_tag(const std::string& name, std::vector<std::pair<std::string, std::string>> attrs, bool self_closing) {
    if (name == "html" || name == "body" || name == "head") {
      for (std::size_t i = 1; i < stack_.size(); ++i) {
        if (doc_.nodes_[stack_[i]].tag == name) return;
      }
    }
    if (closes_paragraph(name)) close_paragraph();
    if (name == "li") {
      if (auto i = find_open("li", {"ul", "ol", "menu", "table", "td", "th", "body", "html"})) pop_to(*i);
    } else if (name == "dt" || name == "dd") {
      auto a = find_open("dt", {"dl", "table", "body", "html"});
      auto b = find_open("dd", {"dl", "table", "body", "html"});
      if (a || b) pop_to(std::min(a.value_or(stack_.size()), b.value_or(stack_.size())));
    } else if (name == "td" || name == "th") {
      auto a = find_open("td", {"tr", "table", "body", "html"});
      auto b = find_open("th", {"tr", "table", "body", "html"});
      if (a || b) pop_to(std::min(a.value_or(stack_.size()), b.value_or(stack_.size())));
    } else if (name == "tr") {
      if (auto i = find_open("tr", {"table", "thead", "tbody", "tfoot", "body", "html"})) pop_to(*i);
    } else if (name == "thead" || name == "tbody" || name == "tfoot") {
      for (auto t : {"thead", "tbody", "tfoot"}) {
        if (auto i = find_open(t, {"table", "body", "html"})) pop_to(*i);
      }
    } else if (name == "option" || name == "optgroup") {
      if (auto i = find_open("option", {"select", "body", "html"})) pop_to(*i);
    } else if (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6') {
      const auto& t = doc_.nodes_[current()].tag;
      if (t.size() == 2 && t[0] == 'h' && t[1] >= '1' && t[1] <= '6') stack_.pop_back();
    } else if (name == "a") {
      if (auto i = find_open("a", {"table", "td", "th", "body", "html"})) pop_to(*i);
    }

    Node node;
    node.tag = name;
    node.attributes = std::move(attrs);
    NodeId id = add_node(std::move(node));

    if (is_void_element(name) || self_closing_allowed(name, self_closing)) return;
    if (is_raw_text(name) || is_rcdata(name)) {
      raw_content(id, name);
      return;
    }
    if (name == "plaintext") {
      stack_.push_back(id);
      append_text(std::string(input_.substr(pos_)));
      pos_ = input_.size();
      return;
    }
    if (stack_.size() < Document::kMaxDepth) stack_.push_back(id);
  }

  static bool self_closing_allowed(std::string_view name, bool self_closing) {
    // Foreign content (svg, math) honours "/>"; HTML elements ignore it.
    return self_closing && !is_raw_text(name) && !is_rcdata(name) &&
           !in(name, {"div", "p", "span", "a", "li", "ul", "ol", "table", "td", "tr", "section", "article"});
  }

  void raw_content(NodeId id, const std::string& name) {
    std::string close = "</" + name;
    std::size_t p = pos_;
    std::size_t end = input_.size();
    while (p < input_.size()) {
      auto lt = input_.find("</", p);
      if (lt == std::string_view::npos) break;
      if (lt + close.size() <= input_.size() && lower(input_.substr(lt, close.size())) == close) {
        std::size_t after = lt + close.size();
        if (after >= input_.size() || is_space(input_[after]) || input_[after] == '>' || input_[after] == '/') {
          end = lt;
          break;
        }
      }
      p = lt + 2;
    }
    std::string_view body = input_.substr(pos_, end - pos_);
    stack_.push_back(id);
    if (is_rcdata(name)) {
      append_text(decode_entities(body));
    } else {
      append_text(std::string(body));
    }
    stack_.pop_back();
    if (end == input_.size()) {
      pos_ = end;
    } else {
      auto gt = input_.find('>', end);
      pos_ = gt == std::string_view::npos ? input_.size() : gt + 1;
    }
  }

  void end_tag(const std::string& name) {
    if (name == "br") {
      start_tag("br", {}, false);
      return;
    }
    if (name == "p" && !find_open("p", {})) return;
    for (std::size_t i = stack_.size() - 1; i > 0; --i) {
      if (doc_.nodes_[stack_[i]].tag == name) {
        pop_to(i);
        return;
      }
    }
  }

  std::string_view input_;
  std::size_t pos_ = 0;
  Document doc_;
  std::vector<NodeId> stack_;
};

Document Document::parse(std::string_view utf8) { return TreeBuilder(utf8).build(); }

std::optional<NodeId> Document::find_first(std::string_view tag) const {
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].is_element() && nodes_[id].tag == tag) return id;
  }
  return std::nullopt;
}

}  // namespace sitedetect::html
