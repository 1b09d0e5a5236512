#pragma once

#include <string>
#include <vector>

namespace fusion {

// 17 significant digits: lossless double round-trip in decimal text.
std::string format_double(double v);

// Minimal JSON writer so every number goes through format_double.
class JsonWriter {
 public:
  void begin_object();
  void end_object();
  void begin_array();
  void end_array();
  void key(const std::string& k);
  void string(const std::string& s);
  void number(double v);
  void number_int(long long v);
  void boolean(bool b);
  void null();
  void raw(const std::string& json_fragment);
  std::string str() const { return out_; }

 private:
  void comma();
  std::string out_;
  std::vector<bool> first_;   // per nesting level
  bool pending_key_ = false;
};

std::string json_escape(const std::string& s);

// Write via temp file + rename so readers never observe a partial artifact.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace fusion
