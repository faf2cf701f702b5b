// Copyright 2026 The dhmc Authors
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

#include "dhm/topology.hpp"

#include <cctype>
#include <charconv>
#include <memory>
#include <optional>
#include <sstream>

#include "dhm/error.hpp"

namespace dhm {
namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { kIdent, kNumber, kString, kColon, kLBrace, kRBrace, kSeparator, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_blank();
    Token t;
    t.line = line_;
    t.column = column_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    if (c == ':') return single(t, Tok::kColon);
    if (c == '{') return single(t, Tok::kLBrace);
    if (c == '}') return single(t, Tok::kRBrace);
    if (c == ';' || c == ',') return single(t, Tok::kSeparator);
    if (c == '"' || c == '\'') return string_literal(t, c);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = Tok::kIdent;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '_' || src_[pos_] == '.')) {
        t.text += advance();
      }
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      t.kind = Tok::kNumber;
      while (pos_ < src_.size()) {
        const char d = src_[pos_];
        const bool exponent_sign = (d == '-' || d == '+') && !t.text.empty() &&
                                   (t.text.back() == 'e' || t.text.back() == 'E');
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || exponent_sign ||
            (t.text.empty() && (d == '-' || d == '+'))) {
          t.text += advance();
        } else {
          break;
        }
      }
      return t;
    }
    throw ParseError(line_, column_, std::string("unexpected character '") + c + "'");
  }

 private:
  char advance() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    return c;
  }

  void skip_blank() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Token single(Token t, Tok kind) {
    t.kind = kind;
    t.text = std::string(1, advance());
    return t;
  }

  Token string_literal(Token t, char quote) {
    t.kind = Tok::kString;
    advance();
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        throw ParseError(t.line, t.column, "unterminated string literal");
      }
      char c = advance();
      if (c == quote) break;
      if (c == '\\') {
        if (pos_ >= src_.size()) throw ParseError(line_, column_, "dangling escape");
        const char e = advance();
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '\\': c = '\\'; break;
          case '"': c = '"'; break;
          case '\'': c = '\''; break;
          default: throw ParseError(line_, column_ - 1, std::string("unknown escape '\\") + e + "'");
        }
      }
      t.text += c;
    }
    return t;
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

// ---------------------------------------------------------------------------
// Generic text-format message tree

struct Message;

struct Field {
  std::string key;
  int line = 0;
  int column = 0;
  // Scalar fields keep the raw token; block fields own a sub-message.
  Token value;
  std::shared_ptr<Message> block;
};

struct Message {
  std::vector<Field> fields;
};

class TreeParser {
 public:
  explicit TreeParser(std::string_view src) : lexer_(src) { look_ = lexer_.next(); }

  Message parse_root() {
    Message root = parse_fields();
    if (look_.kind != Tok::kEnd) throw ParseError(look_.line, look_.column, "unexpected '" + look_.text + "'");
    return root;
  }

 private:
  Token take() {
    Token t = look_;
    look_ = lexer_.next();
    return t;
  }

  Message parse_fields() {
    Message msg;
    while (look_.kind != Tok::kEnd && look_.kind != Tok::kRBrace) {
      if (look_.kind == Tok::kSeparator) {
        take();
        continue;
      }
      if (look_.kind != Tok::kIdent) {
        throw ParseError(look_.line, look_.column, "expected field name, got '" + look_.text + "'");
      }
      Token key = take();
      Field field;
      field.key = key.text;
      field.line = key.line;
      field.column = key.column;
      bool colon = false;
      if (look_.kind == Tok::kColon) {
        take();
        colon = true;
      }
      if (look_.kind == Tok::kLBrace) {
        const Token open = take();
        field.block = std::make_shared<Message>(parse_fields());
        if (look_.kind != Tok::kRBrace) {
          throw ParseError(open.line, open.column, "unbalanced '{' for field '" + field.key + "'");
        }
        take();
      } else if (!colon) {
        throw ParseError(look_.line, look_.column, "expected ':' or '{' after '" + field.key + "'");
      } else if (look_.kind == Tok::kIdent || look_.kind == Tok::kNumber || look_.kind == Tok::kString) {
        field.value = take();
      } else {
        throw ParseError(look_.line, look_.column, "expected a value for '" + field.key + "'");
      }
      msg.fields.push_back(std::move(field));
    }
    return msg;
  }

  Lexer lexer_;
  Token look_;
};

// ---------------------------------------------------------------------------
// Typed accessors

[[noreturn]] void fail(const Field &f, const std::string &message) {
  throw ParseError(f.line, f.column, message);
}

void require_scalar(const Field &f) {
  if (f.block) fail(f, "field '" + f.key + "' expects a scalar value, not a block");
}

int64_t as_int(const Field &f) {
  require_scalar(f);
  const std::string &s = f.value.text;
  int64_t v = 0;
  const char *begin = s.data();
  if (!s.empty() && s[0] == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (f.value.kind != Tok::kNumber || ec != std::errc() || ptr != s.data() + s.size()) {
    fail(f, "field '" + f.key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

int as_small_int(const Field &f) {
  const int64_t v = as_int(f);
  if (v < -(int64_t{1} << 30) || v > (int64_t{1} << 30)) fail(f, "value of '" + f.key + "' out of range");
  return static_cast<int>(v);
}

bool as_bool(const Field &f) {
  require_scalar(f);
  const std::string &s = f.value.text;
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(f, "field '" + f.key + "' expects true or false, got '" + s + "'");
}

std::string as_string(const Field &f) {
  require_scalar(f);
  if (f.value.kind != Tok::kString) fail(f, "field '" + f.key + "' expects a quoted string");
  return f.value.text;
}

std::string as_enum(const Field &f) {
  require_scalar(f);
  if (f.value.kind != Tok::kIdent) fail(f, "field '" + f.key + "' expects an enum identifier");
  return f.value.text;
}

const Message &as_block(const Field &f) {
  if (!f.block) fail(f, "field '" + f.key + "' expects a { ... } block");
  return *f.block;
}

class Interpreter {
 public:
  ParseResult run(const Message &root) {
    ParseResult result;
    std::optional<Shape3> input;
    bool saw_input_dim = false;
    std::vector<int64_t> input_dims;

    for (const Field &f : root.fields) {
      if (f.key == "name") {
        result.model.name = as_string(f);
      } else if (f.key == "input") {
        as_string(f);
      } else if (f.key == "input_dim") {
        saw_input_dim = true;
        input_dims.push_back(as_int(f));
      } else if (f.key == "input_shape") {
        input = read_shape(f);
      } else if (f.key == "layer") {
        read_layer(f, result.model, input);
      } else {
        ignore(f, "");
      }
    }
    if (saw_input_dim) {
      if (input) throw ParseError(1, 1, "input shape declared more than once");
      input = dims_to_shape(root.fields.front(), input_dims);
    }
    if (!input) throw ParseError(1, 1, "missing input shape (input_dim, input_shape or an Input layer)");
    result.model.input = *input;
    result.warnings = std::move(warnings_);
    return result;
  }

 private:
  void ignore(const Field &f, const std::string &layer) {
    warnings_.push_back({Severity::kWarning, layer,
                         "ignored key '" + f.key + "' at " + std::to_string(f.line) + ":" +
                             std::to_string(f.column)});
  }

  Shape3 dims_to_shape(const Field &where, const std::vector<int64_t> &dims) {
    for (int64_t d : dims) {
      if (d < 1 || d > (int64_t{1} << 24)) fail(where, "input dimensions must be in [1, 2^24]");
    }
    if (dims.size() == 4) {
      if (dims[0] != 1) {
        warnings_.push_back({Severity::kWarning, "", "batch dimension " + std::to_string(dims[0]) +
                                                         " ignored; images are streamed one at a time"});
      }
      return {static_cast<int>(dims[1]), static_cast<int>(dims[2]), static_cast<int>(dims[3])};
    }
    if (dims.size() == 3) return {static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])};
    fail(where, "input shape needs 3 (C,H,W) or 4 (N,C,H,W) dims, got " + std::to_string(dims.size()));
  }

  Shape3 read_shape(const Field &f) {
    std::vector<int64_t> dims;
    for (const Field &d : as_block(f).fields) {
      if (d.key == "dim") {
        dims.push_back(as_int(d));
      } else {
        ignore(d, "");
      }
    }
    return dims_to_shape(f, dims);
  }

  // Reads an optional (name, name_h, name_w) triple; the _h/_w forms must agree.
  struct SquareParam {
    std::optional<int> value;
    std::optional<int> h;
    std::optional<int> w;
    const Field *where = nullptr;

    // `base` is the scalar key, `hw` the prefix of its _h/_w forms.
    bool take(const Field &f, const std::string &base, const std::string &hw) {
      if (f.key == base) {
        value = as_small_int(f);
      } else if (f.key == hw + "_h") {
        h = as_small_int(f);
      } else if (f.key == hw + "_w") {
        w = as_small_int(f);
      } else {
        return false;
      }
      where = &f;
      return true;
    }

    std::optional<int> resolve(const std::string &base) const {
      if (h || w) {
        if (!h || !w || *h != *w || (value && *value != *h)) {
          throw Error(ErrorCode::kUnsupported, "non-square " + base + " is not supported");
        }
        return h;
      }
      return value;
    }
  };

  void read_layer(const Field &f, CnnModel &model, std::optional<Shape3> &input) {
    const Message &block = as_block(f);
    std::string name;
    std::optional<std::string> type;
    const Field *type_field = &f;
    const Field *conv_block = nullptr;
    const Field *pool_block = nullptr;
    const Field *fc_block = nullptr;
    const Field *input_block = nullptr;
    std::vector<const Field *> ignored;

    for (const Field &g : block.fields) {
      if (g.key == "name") {
        name = as_string(g);
      } else if (g.key == "type") {
        type = as_string(g);
        type_field = &g;
      } else if (g.key == "bottom" || g.key == "top") {
        as_string(g);
      } else if (g.key == "convolution_param") {
        conv_block = &g;
      } else if (g.key == "pooling_param") {
        pool_block = &g;
      } else if (g.key == "inner_product_param") {
        fc_block = &g;
      } else if (g.key == "input_param") {
        input_block = &g;
      } else {
        ignored.push_back(&g);
      }
    }
    if (!type) fail(f, "layer '" + name + "' has no type");
    for (const Field *g : ignored) ignore(*g, name);

    auto unused = [&](const Field *block_field) {
      if (block_field) ignore(*block_field, name);
    };

    if (*type == "Input") {
      if (!model.layers.empty()) fail(*type_field, "Input layer must precede all other layers");
      if (input) fail(*type_field, "input shape declared more than once");
      if (!input_block) fail(*type_field, "Input layer needs input_param { shape { dim: ... } }");
      for (const Field &g : as_block(*input_block).fields) {
        if (g.key == "shape") {
          input = read_shape(g);
        } else {
          ignore(g, name);
        }
      }
      if (!input) fail(*input_block, "input_param has no shape");
      unused(conv_block);
      unused(pool_block);
      unused(fc_block);
      return;
    }

    LayerSpec layer;
    layer.name = name;
    if (*type == "Convolution") {
      if (!conv_block) fail(*type_field, "Convolution layer '" + name + "' needs convolution_param");
      layer.kind = read_conv(*conv_block, name);
      unused(pool_block);
      unused(fc_block);
    } else if (*type == "Pooling") {
      if (!pool_block) fail(*type_field, "Pooling layer '" + name + "' needs pooling_param");
      layer.kind = read_pool(*pool_block, name);
      unused(conv_block);
      unused(fc_block);
    } else if (*type == "ReLU" || *type == "TanH") {
      layer.kind = ActivationParams{*type == "ReLU" ? ActivationFn::kReLU : ActivationFn::kTanh};
      unused(conv_block);
      unused(pool_block);
      unused(fc_block);
    } else if (*type == "InnerProduct") {
      if (!fc_block) fail(*type_field, "InnerProduct layer '" + name + "' needs inner_product_param");
      layer.kind = read_fc(*fc_block, name);
      unused(conv_block);
      unused(pool_block);
    } else {
      throw Error(ErrorCode::kUnsupported, std::to_string(type_field->line) + ":" +
                                               std::to_string(type_field->column) + ": unsupported layer kind '" +
                                               *type + "' (layer '" + name + "')");
    }
    model.layers.push_back(std::move(layer));
  }

  ConvParams read_conv(const Field &f, const std::string &layer) {
    ConvParams p;
    SquareParam kernel, stride, pad;
    bool have_output = false;
    for (const Field &g : as_block(f).fields) {
      if (g.key == "num_output") {
        p.num_output = as_small_int(g);
        have_output = true;
      } else if (kernel.take(g, "kernel_size", "kernel") || stride.take(g, "stride", "stride") ||
                 pad.take(g, "pad", "pad")) {
      } else if (g.key == "bias_term") {
        p.bias = as_bool(g);
      } else if (g.key == "group" || g.key == "dilation") {
        if (as_int(g) != 1) {
          throw Error(ErrorCode::kUnsupported, "layer '" + layer + "': " + g.key + " != 1 is not supported");
        }
      } else {
        ignore(g, layer);
      }
    }
    if (!have_output) fail(f, "convolution_param of '" + layer + "' needs num_output");
    const auto k = kernel.resolve("kernel_size");
    if (!k) fail(f, "convolution_param of '" + layer + "' needs kernel_size");
    p.kernel = *k;
    p.stride = stride.resolve("stride").value_or(1);
    p.pad = pad.resolve("pad").value_or(0);
    return p;
  }

  PoolParams read_pool(const Field &f, const std::string &layer) {
    PoolParams p;
    SquareParam kernel, stride, pad;
    for (const Field &g : as_block(f).fields) {
      if (g.key == "pool") {
        const std::string mode = as_enum(g);
        if (mode == "MAX") {
          p.mode = PoolMode::kMax;
        } else if (mode == "AVE") {
          p.mode = PoolMode::kAvg;
        } else {
          throw Error(ErrorCode::kUnsupported, "layer '" + layer + "': pooling mode " + mode + " is not supported");
        }
      } else if (kernel.take(g, "kernel_size", "kernel") || stride.take(g, "stride", "stride") ||
                 pad.take(g, "pad", "pad")) {
      } else if (g.key == "global_pooling") {
        if (as_bool(g)) throw Error(ErrorCode::kUnsupported, "layer '" + layer + "': global pooling is not supported");
      } else {
        ignore(g, layer);
      }
    }
    const auto k = kernel.resolve("kernel_size");
    if (!k) fail(f, "pooling_param of '" + layer + "' needs kernel_size");
    p.kernel = *k;
    p.stride = stride.resolve("stride").value_or(p.kernel);
    if (pad.resolve("pad").value_or(0) != 0) {
      throw Error(ErrorCode::kUnsupported, "layer '" + layer + "': padded pooling is not supported");
    }
    return p;
  }

  FullyConnectedParams read_fc(const Field &f, const std::string &layer) {
    FullyConnectedParams p;
    bool have_output = false;
    for (const Field &g : as_block(f).fields) {
      if (g.key == "num_output") {
        p.num_output = as_small_int(g);
        have_output = true;
      } else if (g.key == "bias_term") {
        p.bias = as_bool(g);
      } else {
        ignore(g, layer);
      }
    }
    if (!have_output) fail(f, "inner_product_param of '" + layer + "' needs num_output");
    return p;
  }

  std::vector<Diagnostic> warnings_;
};

// Fills in the inferred input sizes of conv and FC layers.
void infer_input_sizes(CnnModel &model) {
  Shape3 shape = model.input;
  for (auto &layer : model.layers) {
    if (auto *conv = std::get_if<ConvParams>(&layer.kind)) conv->channels = shape.channels;
    if (auto *fc = std::get_if<FullyConnectedParams>(&layer.kind)) {
      fc->inputs = static_cast<int>(shape.elements());
    }
    shape = output_shape(layer, shape);
    if (shape.height < 1 || shape.width < 1) return;
  }
}

std::string quote(const std::string &s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

ParseResult parse_topology(std::string_view source) {
  TreeParser parser(source);
  const Message root = parser.parse_root();
  ParseResult result = Interpreter{}.run(root);
  infer_input_sizes(result.model);

  const auto diagnostics = validate_model(result.model);
  std::string errors;
  for (const auto &d : diagnostics) {
    if (d.severity != Severity::kError) continue;
    if (!errors.empty()) errors += "; ";
    errors += to_string(d);
  }
  if (!errors.empty()) {
    if (result.model.layers.empty()) throw Error(ErrorCode::kShape, "empty network");
    throw Error(ErrorCode::kShape, errors);
  }
  return result;
}

std::string serialize_topology(const CnnModel &model) {
  std::ostringstream out;
  out << "name: " << quote(model.name) << "\n";
  out << "input: \"data\"\n";
  out << "input_shape {\n  dim: 1\n  dim: " << model.input.channels << "\n  dim: " << model.input.height
      << "\n  dim: " << model.input.width << "\n}\n";
  std::string bottom = "data";
  for (const auto &layer : model.layers) {
    out << "layer {\n";
    out << "  name: " << quote(layer.name) << "\n";
    out << "  type: \"" << kind_name(layer.kind) << "\"\n";
    out << "  bottom: " << quote(bottom) << "\n";
    out << "  top: " << quote(layer.name) << "\n";
    if (const auto *conv = std::get_if<ConvParams>(&layer.kind)) {
      out << "  convolution_param {\n"
          << "    num_output: " << conv->num_output << "\n"
          << "    kernel_size: " << conv->kernel << "\n"
          << "    stride: " << conv->stride << "\n"
          << "    pad: " << conv->pad << "\n"
          << "    bias_term: " << (conv->bias ? "true" : "false") << "\n"
          << "  }\n";
    } else if (const auto *pool = std::get_if<PoolParams>(&layer.kind)) {
      out << "  pooling_param {\n"
          << "    pool: " << (pool->mode == PoolMode::kMax ? "MAX" : "AVE") << "\n"
          << "    kernel_size: " << pool->kernel << "\n"
          << "    stride: " << pool->stride << "\n"
          << "  }\n";
    } else if (const auto *fc = std::get_if<FullyConnectedParams>(&layer.kind)) {
      out << "  inner_product_param {\n"
          << "    num_output: " << fc->num_output << "\n"
          << "    bias_term: " << (fc->bias ? "true" : "false") << "\n"
          << "  }\n";
    }
    out << "}\n";
    bottom = layer.name;
  }
  return out.str();
}

}  // namespace dhm
