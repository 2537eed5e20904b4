#include <gtest/gtest.h>

#include <random>

#include "golden.hpp"
#include "sitedetect/content_extractor.hpp"
#include "sitedetect/errors.hpp"
#include "sitedetect/text.hpp"
#include "synthetic.hpp"

namespace sitedetect {
namespace {

TEST(Extraction, GoldenFixtures) {
  auto checks = testing::extraction_golden_checks();
  EXPECT_EQ(checks.size(), 20u);
  for (const auto& c : checks) EXPECT_TRUE(c.ok) << c.name << ": " << c.detail;
}

TEST(Extraction, FourHundredCharacterParagraph) {
  std::string text(400, 'x');
  for (std::size_t i = 7; i < text.size(); i += 8) text[i] = ' ';
  text.back() = '.';
  auto c = extract("<html><body><p>" + text + "</p></body></html>");
  EXPECT_EQ(c.total_chars, 400u);
  EXPECT_EQ(c.link_chars, 0u);
  EXPECT_EQ(c.list_chars, 0u);
  EXPECT_EQ(c.table_chars, 0u);
  EXPECT_EQ(c.paragraphs, std::vector<std::string>{text});
  EXPECT_EQ(c.main_text, text);
}

TEST(Extraction, EmptyBody) {
  auto c = extract("<html><body></body></html>");
  EXPECT_EQ(c.total_chars, 0u);
  EXPECT_TRUE(c.paragraphs.empty());
  EXPECT_EQ(c.word_count, 0u);
  auto r = ratios(c);
  EXPECT_EQ(r.link, 0.0);
  EXPECT_EQ(r.list, 0.0);
  EXPECT_EQ(r.table, 0.0);
  EXPECT_EQ(extract("").total_chars, 0u);
}

TEST(Extraction, RatiosArithmetic) {
  ExtractedContent c;
  c.total_chars = 200;
  c.link_chars = 50;
  c.list_chars = 200;
  auto r = ratios(c);
  EXPECT_DOUBLE_EQ(r.link, 0.25);
  EXPECT_DOUBLE_EQ(r.list, 1.0);
  EXPECT_DOUBLE_EQ(r.table, 0.0);
}

TEST(Extraction, TitleLangAndJoinedMainText) {
  auto c = extract("<html lang=\"de\"><head><title>  Brot \n und  Butter </title></head>"
                   "<body><p>Erster Absatz.</p><p>Zweiter Absatz.</p></body></html>");
  EXPECT_EQ(c.title, std::optional<std::string>("Brot und Butter"));
  EXPECT_EQ(c.lang_hint, std::optional<std::string>("de"));
  EXPECT_EQ(c.main_text, "Erster Absatz.\n\nZweiter Absatz.");
  EXPECT_EQ(c.total_chars, 29u);
  EXPECT_EQ(c.word_count, 4u);
}

TEST(Extraction, LinkListingKeepsItsLinks) {
  std::mt19937_64 rng(3);
  auto c = extract(testing::link_listing_html(rng, "Index", 60));
  EXPECT_GT(c.total_chars, 0u);
  EXPECT_EQ(c.link_chars, c.total_chars);
  EXPECT_EQ(c.word_count, 300u);
}

TEST(Extraction, SyntheticProsePageKeepsOnlyArticle) {
  std::mt19937_64 rng(4);
  auto c = extract(testing::prose_page_html(rng, testing::Band::kHigh, "Title words", 260));
  EXPECT_EQ(c.word_count, 262u);  // two title words in the <h1> plus the body
  EXPECT_EQ(c.link_chars, 0u);
  EXPECT_EQ(c.main_text.find("Copyright"), std::string::npos);
  EXPECT_EQ(c.main_text.find("Another story"), std::string::npos);
}

TEST(Extraction, LandmarksCanBeDisabled) {
  std::string html =
      "<body><div><p>Outside text that is long enough to matter for the score here.</p></div>"
      "<article><p>Inside.</p></article></body>";
  EXPECT_EQ(extract(html).paragraphs, std::vector<std::string>{"Inside."});
  ExtractOptions options;
  options.use_landmarks = false;
  auto c = extract(html, {}, options);
  EXPECT_NE(std::find(c.paragraphs.begin(), c.paragraphs.end(),
                      "Outside text that is long enough to matter for the score here."),
            c.paragraphs.end());
}

// Wrapping the main content in boilerplate must not change what is extracted.
TEST(Extraction, BoilerplateWrappingIsTransparent) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    std::string content;
    int paras = 2 + static_cast<int>(rng() % 5);
    for (int p = 0; p < paras; ++p) {
      content += "<p>" + testing::band_text(rng, i % 2 ? testing::Band::kLow : testing::Band::kHigh, 30 + static_cast<int>(rng() % 60));
      if (rng() % 2) content += " <a href=\"/x\">short link</a> and more";
      content += "</p>\n";
    }
    if (rng() % 2) content += "<ul><li>first point here</li><li>second point</li></ul>";
    std::string bare = "<html><body><div id=\"main\">" + content + "</div></body></html>";
    std::string wrapped =
        "<html><head><title>T</title><style>.x{}</style><script>var a='<p>fake</p>';</script></head><body>"
        "<header><h1>Site name</h1><nav><ul><li><a href=\"/\">Home</a></li><li><a href=\"/a\">About</a></li></ul></nav></header>"
        "<div id=\"main\">" + content + "</div>"
        "<aside><h3>Popular</h3><ul><li><a href=\"/p\">A popular post with a long title</a></li></ul></aside>"
        "<form><input><button>Subscribe to our newsletter</button></form>"
        "<footer><p>Copyright and legal notices, privacy policy, terms of service.</p></footer>"
        "<div hidden><p>Cookie banner text that is hidden.</p></div></body></html>";
    auto a = extract(bare);
    auto b = extract(wrapped);
    EXPECT_EQ(a.paragraphs, b.paragraphs) << "pair " << i;
    EXPECT_EQ(a.total_chars, b.total_chars);
    EXPECT_EQ(a.link_chars, b.link_chars);
    EXPECT_EQ(a.list_chars, b.list_chars);
    EXPECT_EQ(a.table_chars, b.table_chars);
  }
}

TEST(Extraction, InvariantsOnRandomMarkup) {
  std::mt19937_64 rng(77);
  const char* fragments[] = {"<p>", "</p>", "<div>", "</div>", "<a href=x>", "</a>", "<ul>", "<li>", "</li>",
                             "</ul>", "<table><tr><td>", "</td></tr></table>", "<br>", "<nav>", "</nav>",
                             "<script>", "</script>", "&amp;", "&#x41;", " ", "\n", "word", "longer words here",
                             "<article>", "</article>", "<h2>", "</h2>", "<", ">", "\"", "caf\xC3\xA9", "\xE2\x80\x8B"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::string html;
    int n = static_cast<int>(rng() % 80);
    for (int i = 0; i < n; ++i) html += fragments[rng() % std::size(fragments)];
    ExtractedContent c;
    ASSERT_NO_THROW(c = extract(html)) << html;
    EXPECT_LE(c.link_chars, c.total_chars);
    EXPECT_LE(c.list_chars, c.total_chars);
    EXPECT_LE(c.table_chars, c.total_chars);
    std::size_t sum = 0;
    for (const auto& p : c.paragraphs) {
      EXPECT_FALSE(p.empty());
      sum += utf8_to_u32(p).size();
    }
    EXPECT_EQ(sum, c.total_chars);
    EXPECT_EQ(extract(html), c);
  }
}

TEST(Decoding, CharsetSources) {
  EXPECT_EQ(decode_html_bytes("\xEF\xBB\xBFplain"), "plain");
  EXPECT_EQ(decode_html_bytes("caf\xE9", "iso-8859-1"), "caf\xC3\xA9");
  EXPECT_EQ(decode_html_bytes("<meta charset=\"windows-1252\"><p>\x93hi\x94</p>"),
            "<meta charset=\"windows-1252\"><p>\xE2\x80\x9Chi\xE2\x80\x9D</p>");
  EXPECT_EQ(decode_html_bytes(std::string("\xFF\xFEh\0i\0", 6)), "hi");
  EXPECT_THROW(decode_html_bytes("caf\xE9 without declaration"), Error);
  EXPECT_THROW(decode_html_bytes("\xEF\xBB\xBF\xC3"), Error);
  try {
    decode_html_bytes("\xFF\xFE\xFF");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEncodingError);
  }
}

TEST(Decoding, ContentTypeCharset) {
  EXPECT_EQ(charset_from_content_type("text/html; charset=ISO-8859-1"), std::optional<std::string>("iso-8859-1"));
  EXPECT_EQ(charset_from_content_type("text/html; charset=\"utf-8\""), std::optional<std::string>("utf-8"));
  EXPECT_FALSE(charset_from_content_type("text/html"));
}

}  // namespace
}  // namespace sitedetect
