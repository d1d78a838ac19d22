#include "synthetic_crops.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "cropxai/rng.hpp"

namespace cropxai::testing {

namespace {

struct Range {
  double lo;
  double hi;
};

struct CropProfile {
  Range n, p, k, temperature, humidity, ph, rainfall;
};

const std::map<std::string, CropProfile>& profiles() {
  static const std::map<std::string, CropProfile> table{
      {"apple", {{0, 40}, {120, 145}, {195, 205}, {21.0, 24.0}, {90.0, 95.0}, {5.5, 6.5}, {100, 125}}},
      {"banana", {{80, 120}, {70, 95}, {45, 55}, {25.0, 30.0}, {75.0, 85.0}, {5.5, 6.5}, {90, 120}}},
      {"blackgram", {{20, 60}, {55, 80}, {15, 25}, {25.0, 35.0}, {60.0, 70.0}, {6.5, 7.8}, {60, 75}}},
      {"chickpea", {{20, 60}, {55, 80}, {75, 85}, {17.0, 21.0}, {14.0, 20.0}, {6.0, 8.9}, {65, 95}}},
      {"coconut", {{0, 40}, {5, 30}, {25, 35}, {25.0, 30.0}, {90.0, 100.0}, {5.5, 6.5}, {131, 226}}},
      {"coffee", {{80, 120}, {15, 40}, {25, 35}, {23.0, 28.0}, {50.0, 70.0}, {6.0, 7.5}, {115, 200}}},
      {"cotton", {{100, 140}, {35, 60}, {15, 25}, {22.0, 26.0}, {75.0, 85.0}, {5.8, 8.0}, {60, 100}}},
      {"grapes", {{0, 40}, {120, 145}, {195, 205}, {8.8, 42.0}, {80.0, 84.0}, {5.5, 6.5}, {65, 75}}},
      {"jute", {{60, 100}, {35, 60}, {35, 45}, {23.0, 27.0}, {70.0, 90.0}, {6.0, 7.5}, {150, 200}}},
      {"kidneybeans", {{0, 40}, {55, 80}, {15, 25}, {15.0, 25.0}, {18.0, 25.0}, {5.5, 6.0}, {60, 150}}},
      {"lentil", {{0, 40}, {55, 80}, {15, 25}, {18.0, 30.0}, {60.0, 70.0}, {5.9, 7.8}, {35, 55}}},
      {"maize", {{60, 100}, {35, 60}, {15, 25}, {18.0, 26.5}, {55.0, 75.0}, {5.5, 7.0}, {60, 110}}},
      {"mango", {{0, 40}, {15, 40}, {25, 35}, {27.0, 36.0}, {45.0, 55.0}, {4.5, 7.0}, {89, 101}}},
      {"mothbeans", {{0, 40}, {35, 60}, {15, 25}, {24.0, 32.0}, {40.0, 65.0}, {3.5, 9.9}, {30, 75}}},
      {"mungbean", {{0, 40}, {35, 60}, {15, 25}, {27.0, 30.0}, {80.0, 90.0}, {6.2, 7.2}, {36, 60}}},
      {"muskmelon", {{80, 120}, {5, 30}, {45, 55}, {27.0, 30.0}, {90.0, 95.0}, {6.0, 6.8}, {20, 30}}},
      {"orange", {{0, 40}, {5, 30}, {5, 15}, {10.0, 35.0}, {90.0, 95.0}, {6.0, 8.0}, {100, 120}}},
      {"papaya", {{31, 70}, {46, 70}, {45, 55}, {23.0, 44.0}, {90.0, 95.0}, {6.5, 7.0}, {40, 249}}},
      {"pigeonpeas", {{0, 40}, {55, 80}, {15, 25}, {18.0, 37.0}, {30.0, 70.0}, {4.5, 7.5}, {90, 199}}},
      {"pomegranate", {{0, 40}, {5, 30}, {35, 45}, {18.0, 25.0}, {85.0, 95.0}, {5.6, 7.2}, {102, 113}}},
      {"rice", {{60, 99}, {35, 60}, {35, 45}, {20.0, 27.0}, {80.0, 85.0}, {5.0, 7.9}, {182, 299}}},
      {"watermelon", {{80, 120}, {5, 30}, {45, 55}, {24.0, 27.0}, {80.0, 90.0}, {6.0, 7.0}, {40, 60}}},
  };
  return table;
}

double round_to(double v, double digits) {
  const double scale = std::pow(10.0, digits);
  return std::round(v * scale) / scale;
}

}  // namespace

Dataset synthetic_crops(std::size_t per_class, std::uint64_t seed,
                        const std::vector<std::string>& crops) {
  Dataset data;
  Rng rng(seed);
  for (const auto& crop : crops) {
    const auto label = find_class(data.classes, crop);
    const auto it = profiles().find(crop);
    if (!label || it == profiles().end()) throw std::invalid_argument("unknown crop " + crop);
    const CropProfile& c = it->second;
    for (std::size_t i = 0; i < per_class; ++i) {
      Sample s;
      s.label = *label;
      s.features[kNitrogen] = std::floor(rng.uniform(c.n.lo, c.n.hi + 1.0));
      s.features[kPhosphorus] = std::floor(rng.uniform(c.p.lo, c.p.hi + 1.0));
      s.features[kPotassium] = std::floor(rng.uniform(c.k.lo, c.k.hi + 1.0));
      s.features[kTemperature] = round_to(rng.uniform(c.temperature.lo, c.temperature.hi), 6);
      s.features[kHumidity] = round_to(rng.uniform(c.humidity.lo, c.humidity.hi), 6);
      s.features[kPh] = round_to(rng.uniform(c.ph.lo, c.ph.hi), 6);
      s.features[kRainfall] = round_to(rng.uniform(c.rainfall.lo, c.rainfall.hi), 6);
      data.samples.push_back(s);
    }
  }
  return data;
}

Dataset synthetic_crops(std::size_t per_class, std::uint64_t seed) {
  return synthetic_crops(per_class, seed, crop_classes());
}

}  // namespace cropxai::testing
