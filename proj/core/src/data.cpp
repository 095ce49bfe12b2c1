#include "cagnet/data.hpp"

#include <algorithm>
#include <filesystem>

namespace cagnet {

namespace fs = std::filesystem;

std::vector<SamplePair> load_pairs(const std::string& root) {
  const fs::path images = fs::path(root) / "images";
  const fs::path masks = fs::path(root) / "masks";
  check(fs::is_directory(images), "not a directory: " + images.string());
  check(fs::is_directory(masks), "not a directory: " + masks.string());

  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(images))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      stems.push_back(entry.path().stem().string());
  std::sort(stems.begin(), stems.end());
  check(!stems.empty(), "no .ppm images under " + images.string());

  // Every mask must belong to an image as well.
  for (const auto& entry : fs::directory_iterator(masks))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      check(std::binary_search(stems.begin(), stems.end(),
                               entry.path().stem().string()),
            "mask without image: " + entry.path().string());

  std::vector<SamplePair> pairs;
  pairs.reserve(stems.size());
  for (const auto& stem : stems) {
    const fs::path mask_path = masks / (stem + ".pgm");
    check(fs::exists(mask_path), "missing mask: " + mask_path.string());
    SamplePair p;
    p.stem = stem;
    p.image = read_pnm((images / (stem + ".ppm")).string());
    p.mask = binarize_mask(read_pnm(mask_path.string()));
    check(p.image.channels == 3, "image must be colour: " + stem);
    check(p.image.h == p.mask.h && p.image.w == p.mask.w,
          "image and mask sizes differ for " + stem);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

Tensor to_input_tensor(const ImageU8& image, int size) {
  check(image.channels == 3, "network input must be a colour image");
  const ImageU8 resized = (image.h == size && image.w == size)
                              ? image
                              : resize_image(image, size, size);
  return image_to_tensor(resized);
}

Tensor to_target_tensor(const ImageU8& mask, int size) {
  check(mask.channels == 1, "training target must be a greyscale mask");
  const ImageU8 resized = (mask.h == size && mask.w == size)
                              ? mask
                              : binarize_mask(resize_image(mask, size, size));
  return mask_to_tensor(resized);
}

}  // namespace cagnet
