// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "forge/util.hpp"

namespace forge::html {

namespace detail {

inline std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '&') {
            auto semi = s.find(';', i);
            if (semi != std::string_view::npos && semi - i <= 10) {
                std::string_view ent = s.substr(i + 1, semi - i - 1);
                if (ent == "amp") { out += '&'; i = semi + 1; continue; }
                if (ent == "lt") { out += '<'; i = semi + 1; continue; }
                if (ent == "gt") { out += '>'; i = semi + 1; continue; }
                if (ent == "quot") { out += '"'; i = semi + 1; continue; }
                if (ent == "apos") { out += '\''; i = semi + 1; continue; }
                if (ent == "nbsp") { out += ' '; i = semi + 1; continue; }
                if (!ent.empty() && ent[0] == '#') {
                    uint32_t cp = 0;
                    bool ok = true;
                    if (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')) {
                        for (size_t k = 2; k < ent.size(); ++k) {
                            char c = ent[k];
                            if (!std::isxdigit(static_cast<unsigned char>(c))) { ok = false; break; }
                            cp = cp * 16 + (std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                                                                                        : (std::tolower(c) - 'a' + 10));
                        }
                    } else {
                        for (size_t k = 1; k < ent.size(); ++k) {
                            if (!std::isdigit(static_cast<unsigned char>(ent[k]))) { ok = false; break; }
                            cp = cp * 10 + (ent[k] - '0');
                        }
                    }
                    if (ok && cp) {
                        util::utf8_append(out, cp);
                        i = semi + 1;
                        continue;
                    }
                }
            }
        }
        out += s[i++];
    }
    return out;
}

struct Tag {
    std::string name;
    bool closing = false;
    std::string attrs;
};

inline std::string collapse_ws(std::string_view s) {
    std::string out;
    bool ws = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            ws = true;
            continue;
        }
        if (ws && !out.empty()) out += ' ';
        ws = false;
        out += c;
    }
    return out;
}

inline std::string attr_value(const std::string& attrs, const std::string& name) {
    std::string needle = name + "=";
    auto pos = attrs.find(needle);
    if (pos == std::string::npos) return {};
    pos += needle.size();
    if (pos >= attrs.size()) return {};
    char q = attrs[pos];
    if (q == '"' || q == '\'') {
        auto end = attrs.find(q, pos + 1);
        if (end == std::string::npos) return {};
        return attrs.substr(pos + 1, end - pos - 1);
    }
    auto end = attrs.find_first_of(" \t\n>", pos);
    return attrs.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

} // namespace detail

/// Converts markup to a compact markdown rendering: headings, paragraphs,
/// list items, links, emphasis, and tables as pipe rows. Script/style bodies
/// are dropped. Good enough for DOM review and goal-driven extraction; not a
/// spec-complete HTML parser.
inline std::string to_markdown(const std::string& html) {
    std::string out;
    std::string text_run;
    bool in_script = false;
    std::string script_tag;
    bool in_row = false;
    int link_depth = 0;
    std::string link_href;
    std::string link_text;

    auto flush_text = [&](bool cell_break = false) {
        std::string t = detail::collapse_ws(detail::decode_entities(text_run));
        text_run.clear();
        if (t.empty()) return;
        if (link_depth > 0) {
            link_text += (link_text.empty() ? "" : " ") + t;
            return;
        }
        if (!out.empty() && out.back() != '\n' && out.back() != ' ' && out.back() != '|') out += ' ';
        out += t;
        (void)cell_break;
    };
    auto newline = [&](int count = 1) {
        flush_text();
        int have = 0;
        for (auto it = out.rbegin(); it != out.rend() && *it == '\n'; ++it) ++have;
        while (!out.empty() && out.back() == ' ') out.pop_back();
        for (; have < count; ++have) out += '\n';
    };

    size_t i = 0;
    const size_t n = html.size();
    while (i < n) {
        if (html[i] == '<') {
            auto end = html.find('>', i);
            if (end == std::string::npos) {
                text_run += html.substr(i);
                break;
            }
            std::string raw = html.substr(i + 1, end - i - 1);
            i = end + 1;
            if (util::starts_with(raw, "!--")) {
                auto close = html.find("-->", end);
                i = close == std::string::npos ? n : close + 3;
                continue;
            }
            detail::Tag tag;
            size_t p = 0;
            if (p < raw.size() && raw[p] == '/') {
                tag.closing = true;
                ++p;
            }
            size_t name_start = p;
            while (p < raw.size() && (std::isalnum(static_cast<unsigned char>(raw[p])) || raw[p] == '!')) ++p;
            tag.name = util::to_lower(raw.substr(name_start, p - name_start));
            tag.attrs = raw.substr(p);

            if (in_script) {
                if (tag.closing && tag.name == script_tag) in_script = false;
                continue;
            }
            if (!tag.closing && (tag.name == "script" || tag.name == "style")) {
                in_script = true;
                script_tag = tag.name;
                continue;
            }

            if (tag.name == "br") {
                newline();
            } else if (tag.name == "p" || tag.name == "div" || tag.name == "section" || tag.name == "article") {
                newline(tag.closing ? 2 : 1);
            } else if (tag.name.size() == 2 && tag.name[0] == 'h' && tag.name[1] >= '1' && tag.name[1] <= '6') {
                if (!tag.closing) {
                    newline(2);
                    out.append(static_cast<size_t>(tag.name[1] - '0'), '#');
                    out += ' ';
                } else {
                    newline(2);
                }
            } else if (tag.name == "li") {
                if (!tag.closing) {
                    newline();
                    out += "- ";
                } else {
                    newline();
                }
            } else if (tag.name == "tr") {
                if (!tag.closing) {
                    newline();
                    out += "|";
                    in_row = true;
                } else {
                    flush_text();
                    newline();
                    in_row = false;
                }
            } else if (tag.name == "td" || tag.name == "th") {
                if (!tag.closing) {
                    flush_text();
                    if (in_row) out += " ";
                } else {
                    flush_text();
                    if (in_row) {
                        while (!out.empty() && out.back() == ' ') out.pop_back();
                        out += " |";
                    }
                }
            } else if (tag.name == "table") {
                newline(2);
            } else if (tag.name == "a") {
                if (!tag.closing) {
                    flush_text();
                    ++link_depth;
                    link_href = detail::attr_value(tag.attrs, "href");
                    link_text.clear();
                } else if (link_depth > 0) {
                    flush_text();
                    --link_depth;
                    if (!out.empty() && out.back() != '\n' && out.back() != ' ' && out.back() != '|') out += ' ';
                    if (link_href.empty())
                        out += link_text;
                    else
                        out += "[" + link_text + "](" + link_href + ")";
                }
            } else if (tag.name == "b" || tag.name == "strong") {
                flush_text();
                out += "**";
            } else if (tag.name == "i" || tag.name == "em") {
                flush_text();
                out += "*";
            }
            continue;
        }
        text_run += html[i++];
    }
    flush_text();

    // collapse >2 consecutive newlines
    std::string cleaned;
    int nl = 0;
    for (char c : out) {
        if (c == '\n') {
            if (++nl <= 2) cleaned += c;
        } else {
            nl = 0;
            cleaned += c;
        }
    }
    return util::trim(cleaned) + "\n";
}

/// Renders text into a tiny PPM (P6) raster with a 5x7 bitmap font — the
/// desk-scale stand-in for a browser screenshot so evidence bundles always
/// carry a reviewable image. Non-ASCII codepoints render as filled blocks.
inline std::string render_text_image(const std::string& text, int max_cols = 100, int max_rows = 48) {
    static const uint8_t kFont[96][5] = {
        {0x00,0x00,0x00,0x00,0x00},{0x00,0x00,0x5F,0x00,0x00},{0x00,0x07,0x00,0x07,0x00},{0x14,0x7F,0x14,0x7F,0x14},
        {0x24,0x2A,0x7F,0x2A,0x12},{0x23,0x13,0x08,0x64,0x62},{0x36,0x49,0x55,0x22,0x50},{0x00,0x05,0x03,0x00,0x00},
        {0x00,0x1C,0x22,0x41,0x00},{0x00,0x41,0x22,0x1C,0x00},{0x08,0x2A,0x1C,0x2A,0x08},{0x08,0x08,0x3E,0x08,0x08},
        {0x00,0x50,0x30,0x00,0x00},{0x08,0x08,0x08,0x08,0x08},{0x00,0x60,0x60,0x00,0x00},{0x20,0x10,0x08,0x04,0x02},
        {0x3E,0x51,0x49,0x45,0x3E},{0x00,0x42,0x7F,0x40,0x00},{0x42,0x61,0x51,0x49,0x46},{0x21,0x41,0x45,0x4B,0x31},
        {0x18,0x14,0x12,0x7F,0x10},{0x27,0x45,0x45,0x45,0x39},{0x3C,0x4A,0x49,0x49,0x30},{0x01,0x71,0x09,0x05,0x03},
        {0x36,0x49,0x49,0x49,0x36},{0x06,0x49,0x49,0x29,0x1E},{0x00,0x36,0x36,0x00,0x00},{0x00,0x56,0x36,0x00,0x00},
        {0x00,0x08,0x14,0x22,0x41},{0x14,0x14,0x14,0x14,0x14},{0x41,0x22,0x14,0x08,0x00},{0x02,0x01,0x51,0x09,0x06},
        {0x32,0x49,0x79,0x41,0x3E},{0x7E,0x11,0x11,0x11,0x7E},{0x7F,0x49,0x49,0x49,0x36},{0x3E,0x41,0x41,0x41,0x22},
        {0x7F,0x41,0x41,0x22,0x1C},{0x7F,0x49,0x49,0x49,0x41},{0x7F,0x09,0x09,0x01,0x01},{0x3E,0x41,0x41,0x51,0x32},
        {0x7F,0x08,0x08,0x08,0x7F},{0x00,0x41,0x7F,0x41,0x00},{0x20,0x40,0x41,0x3F,0x01},{0x7F,0x08,0x14,0x22,0x41},
        {0x7F,0x40,0x40,0x40,0x40},{0x7F,0x02,0x04,0x02,0x7F},{0x7F,0x04,0x08,0x10,0x7F},{0x3E,0x41,0x41,0x41,0x3E},
        {0x7F,0x09,0x09,0x09,0x06},{0x3E,0x41,0x51,0x21,0x5E},{0x7F,0x09,0x19,0x29,0x46},{0x46,0x49,0x49,0x49,0x31},
        {0x01,0x01,0x7F,0x01,0x01},{0x3F,0x40,0x40,0x40,0x3F},{0x1F,0x20,0x40,0x20,0x1F},{0x7F,0x20,0x18,0x20,0x7F},
        {0x63,0x14,0x08,0x14,0x63},{0x03,0x04,0x78,0x04,0x03},{0x61,0x51,0x49,0x45,0x43},{0x00,0x00,0x7F,0x41,0x41},
        {0x02,0x04,0x08,0x10,0x20},{0x41,0x41,0x7F,0x00,0x00},{0x04,0x02,0x01,0x02,0x04},{0x40,0x40,0x40,0x40,0x40},
        {0x00,0x01,0x02,0x04,0x00},{0x20,0x54,0x54,0x54,0x78},{0x7F,0x48,0x44,0x44,0x38},{0x38,0x44,0x44,0x44,0x20},
        {0x38,0x44,0x44,0x48,0x7F},{0x38,0x54,0x54,0x54,0x18},{0x08,0x7E,0x09,0x01,0x02},{0x08,0x14,0x54,0x54,0x3C},
        {0x7F,0x08,0x04,0x04,0x78},{0x00,0x44,0x7D,0x40,0x00},{0x20,0x40,0x44,0x3D,0x00},{0x00,0x7F,0x10,0x28,0x44},
        {0x00,0x41,0x7F,0x40,0x00},{0x7C,0x04,0x18,0x04,0x78},{0x7C,0x08,0x04,0x04,0x78},{0x38,0x44,0x44,0x44,0x38},
        {0x7C,0x14,0x14,0x14,0x08},{0x08,0x14,0x14,0x18,0x7C},{0x7C,0x08,0x04,0x04,0x08},{0x48,0x54,0x54,0x54,0x20},
        {0x04,0x3F,0x44,0x40,0x20},{0x3C,0x40,0x40,0x20,0x7C},{0x1C,0x20,0x40,0x20,0x1C},{0x3C,0x40,0x30,0x40,0x3C},
        {0x44,0x28,0x10,0x28,0x44},{0x0C,0x50,0x50,0x50,0x3C},{0x44,0x64,0x54,0x4C,0x44},{0x00,0x08,0x36,0x41,0x00},
        {0x00,0x00,0x7F,0x00,0x00},{0x00,0x41,0x36,0x08,0x00},{0x08,0x08,0x2A,0x1C,0x08},{0x08,0x1C,0x2A,0x08,0x08},
    };
    // Lay out codepoints into a fixed grid.
    std::vector<std::vector<uint32_t>> grid;
    grid.emplace_back();
    size_t i = 0;
    while (i < text.size() && static_cast<int>(grid.size()) <= max_rows) {
        uint32_t cp = util::utf8_next(text, i);
        if (cp == '\n') {
            grid.emplace_back();
            continue;
        }
        if (cp == '\t') cp = ' ';
        if (static_cast<int>(grid.back().size()) < max_cols) grid.back().push_back(cp);
    }
    if (static_cast<int>(grid.size()) > max_rows) grid.resize(static_cast<size_t>(max_rows));

    const int cw = 6, ch = 9; // cell size incl. spacing
    const int width = max_cols * cw + 8;
    const int height = static_cast<int>(grid.size()) * ch + 8;
    std::vector<uint8_t> pix(static_cast<size_t>(width) * height * 3, 0xFF);
    auto put = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        size_t o = (static_cast<size_t>(y) * width + x) * 3;
        pix[o] = pix[o + 1] = pix[o + 2] = 0x20;
    };
    for (size_t row = 0; row < grid.size(); ++row) {
        for (size_t col = 0; col < grid[row].size(); ++col) {
            uint32_t cp = grid[row][col];
            int ox = 4 + static_cast<int>(col) * cw;
            int oy = 4 + static_cast<int>(row) * ch;
            if (cp >= 0x20 && cp < 0x80) {
                const uint8_t* glyph = kFont[cp - 0x20];
                for (int gx = 0; gx < 5; ++gx)
                    for (int gy = 0; gy < 7; ++gy)
                        if (glyph[gx] & (1 << gy)) put(ox + gx, oy + gy);
            } else {
                for (int gx = 0; gx < 5; ++gx)
                    for (int gy = 1; gy < 7; ++gy)
                        put(ox + gx, oy + gy);
            }
        }
    }
    std::string ppm = util::format("P6\n%d %d\n255\n", width, height);
    ppm.append(reinterpret_cast<const char*>(pix.data()), pix.size());
    return ppm;
}

} // namespace forge::html
