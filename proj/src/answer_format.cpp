#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include "foaground/dataset_gen.hpp"

namespace foaground {

namespace {

// Hand-written scanner over answer text; every failure names the byte span
// that broke the grammar.
class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    [[nodiscard]] bool at_end() const { return pos_ >= text_.size(); }
    [[nodiscard]] std::size_t pos() const { return pos_; }
    [[nodiscard]] char peek() const { return at_end() ? '\0' : text_[pos_]; }

    [[noreturn]] void fail(std::size_t begin, std::size_t end, const std::string& what) const {
        end = std::min(std::max(end, begin + 1), text_.size());
        begin = std::min(begin, text_.size());
        const std::string span = begin < end ? std::string(text_.substr(begin, end - begin)) : std::string("<end>");
        throw Error(ErrorKind::Parse, what + " at " + std::to_string(begin) + ".." + std::to_string(end) + " ('" +
                                          span + "')");
    }

    void expect_word(std::string_view word) {
        skip_ws();
        const std::size_t begin = pos_;
        for (char c : word) {
            if (at_end() || std::tolower(static_cast<unsigned char>(text_[pos_])) != c) {
                fail(begin, token_end(begin), "expected '" + std::string(word) + "'");
            }
            ++pos_;
        }
    }

    void expect_char(char c) {
        skip_ws();
        if (peek() != c) fail(pos_, token_end(pos_), std::string("expected '") + c + "'");
        ++pos_;
    }

    long long integer() {
        skip_ws();
        const std::size_t begin = pos_;
        std::size_t p = pos_;
        if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
        const std::size_t digits = p;
        while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) ++p;
        if (p == digits) fail(begin, token_end(begin), "expected an integer");
        const std::size_t skip = text_[begin] == '+' ? 1 : 0;
        long long value = 0;
        const auto res = std::from_chars(text_.data() + begin + skip, text_.data() + p, value);
        if (res.ec != std::errc() || res.ptr != text_.data() + p) fail(begin, p, "integer out of range");
        pos_ = p;
        return value;
    }

    // Raw field text up to the next ',' or ')', trimmed.
    std::pair<std::string_view, std::size_t> field() {
        skip_ws();
        const std::size_t begin = pos_;
        while (!at_end() && text_[pos_] != ',' && text_[pos_] != ')') ++pos_;
        std::size_t end = pos_;
        while (end > begin && std::isspace(static_cast<unsigned char>(text_[end - 1]))) --end;
        return {text_.substr(begin, end - begin), begin};
    }

    [[nodiscard]] std::size_t token_end(std::size_t begin) const {
        std::size_t p = begin;
        while (p < text_.size() && !std::isspace(static_cast<unsigned char>(text_[p]))) ++p;
        return p;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string format_cm(double meters) {
    const long long q = std::llround(meters * 100.0);
    const long long a = q < 0 ? -q : q;
    std::string out = q < 0 ? "-" : "";
    out += std::to_string(a / 100);
    out += '.';
    out += static_cast<char>('0' + (a % 100) / 10);
    out += static_cast<char>('0' + a % 10);
    return out;
}

bool valid_category(std::string_view c) {
    if (c.empty() || !(std::isalpha(static_cast<unsigned char>(c[0])) || c[0] == '_')) return false;
    return std::all_of(c.begin(), c.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
    });
}

}  // namespace

std::string format_doa_answer(const DoA& doa) {
    const long long az = std::llround(doa.azimuth_deg);
    const long long el = std::llround(doa.elevation_deg);
    return "azimuth: " + std::to_string(az) + "; elevation: " + std::to_string(el);
}

DoA parse_doa_answer(std::string_view text) {
    Cursor c(text);
    c.expect_word("azimuth");
    c.expect_char(':');
    const auto az = c.integer();
    c.expect_char(';');
    c.expect_word("elevation");
    c.expect_char(':');
    const auto el = c.integer();
    c.skip_ws();
    if (!c.at_end()) c.fail(c.pos(), text.size(), "unexpected trailing text");
    return DoA::checked(static_cast<double>(az), static_cast<double>(el));
}

double quantize_cm(double meters) { return static_cast<double>(std::llround(meters * 100.0)) / 100.0; }

Box3D quantize_box(const Box3D& box) {
    return {box.category,
            {quantize_cm(box.center.x), quantize_cm(box.center.y), quantize_cm(box.center.z)},
            {quantize_cm(box.extents.x), quantize_cm(box.extents.y), quantize_cm(box.extents.z)}};
}

std::string format_bbox(int k, const Box3D& box) {
    validate(box);
    if (k < 0) throw Error(ErrorKind::Range, "bbox index must be nonnegative");
    return "bbox_" + std::to_string(k) + " = Bbox(" + box.category + ", " + format_cm(box.center.x) + ", " +
           format_cm(box.center.y) + ", " + format_cm(box.center.z) + ", " + format_cm(box.extents.x) + ", " +
           format_cm(box.extents.y) + ", " + format_cm(box.extents.z) + ")";
}

std::pair<int, Box3D> parse_bbox(std::string_view text) {
    Cursor c(text);
    c.expect_word("bbox_");
    const std::size_t k_pos = c.pos();
    if (!std::isdigit(static_cast<unsigned char>(c.peek()))) c.fail(k_pos, c.token_end(k_pos), "expected a box index");
    const auto k = c.integer();
    if (k > 1'000'000) c.fail(k_pos, c.pos(), "box index out of range");
    c.expect_char('=');
    c.expect_word("bbox");
    c.expect_char('(');

    std::vector<std::pair<std::string_view, std::size_t>> fields;
    while (true) {
        fields.push_back(c.field());
        if (c.at_end()) c.fail(text.size(), text.size(), "missing ')'");
        if (c.peek() == ')') break;
        c.expect_char(',');
    }
    c.expect_char(')');
    const std::size_t close = c.pos();
    c.skip_ws();
    if (!c.at_end()) c.fail(c.pos(), text.size(), "unexpected trailing text");
    if (fields.size() != 7) {
        c.fail(fields.front().second, close, "Bbox takes 7 fields, found " + std::to_string(fields.size()));
    }

    Box3D box;
    const auto& [cat, cat_pos] = fields[0];
    if (!valid_category(cat)) c.fail(cat_pos, cat_pos + cat.size(), "bad category");
    box.category = std::string(cat);
    std::array<double, 6> v{};
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& [f, f_pos] = fields[i + 1];
        const std::size_t skip = !f.empty() && f[0] == '+' ? 1 : 0;
        const auto res = std::from_chars(f.data() + skip, f.data() + f.size(), v[i]);
        if (f.size() == skip || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v[i])) {
            c.fail(f_pos, f_pos + f.size(), "field " + std::to_string(i + 2) + " is not a number");
        }
        if (i >= 3 && !(v[i] > 0.0)) c.fail(f_pos, f_pos + f.size(), "extents must be positive");
    }
    box.center = {v[0], v[1], v[2]};
    box.extents = {v[3], v[4], v[5]};
    return {static_cast<int>(k), box};
}

std::string format_bboxes(const std::vector<Box3D>& boxes) {
    std::string out;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
        if (k > 0) out += '\n';
        out += format_bbox(static_cast<int>(k), boxes[k]);
    }
    return out;
}

std::vector<Box3D> parse_bboxes(std::string_view text) {
    std::vector<Box3D> boxes;
    int last_k = -1;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        const auto line = text.substr(start, end - start);
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            std::pair<int, Box3D> parsed;
            try {
                parsed = parse_bbox(line);
            } catch (const Error& e) {
                throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
            }
            if (parsed.first <= last_k) {
                throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bbox_" +
                                                  std::to_string(parsed.first) + " does not follow bbox_" +
                                                  std::to_string(last_k));
            }
            last_k = parsed.first;
            boxes.push_back(parsed.second);
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return boxes;
}

std::vector<std::string> position_labels(std::size_t n) {
    if (n == 2) return {"Left", "Right"};
    if (n == 3) return {"Left", "Center", "Right"};
    throw Error(ErrorKind::Input, "position labels exist for 2 or 3 candidates, not " + std::to_string(n));
}

int label_rank(std::string_view label) {
    if (label == "Left") return 0;
    if (label == "Center") return 1;
    if (label == "Right") return 2;
    throw Error(ErrorKind::Parse, "unknown position label '" + std::string(label) + "'");
}

std::string kind_phrase(SourceKind kind) { return kind == SourceKind::HarmonicTone ? "harmonic tone" : "noise burst"; }

std::optional<SourceKind> kind_named_in(std::string_view question) {
    const bool tone = question.find(kind_phrase(SourceKind::HarmonicTone)) != std::string_view::npos;
    const bool noise = question.find(kind_phrase(SourceKind::BandNoise)) != std::string_view::npos;
    if (tone == noise) return std::nullopt;
    return tone ? SourceKind::HarmonicTone : SourceKind::BandNoise;
}

}  // namespace foaground
