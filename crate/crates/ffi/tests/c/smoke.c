#include <stdio.h>
#include <string.h>
#include "ucgan.h"

#define CHECK(cond)                                               \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "line %d: %s\n", __LINE__, #cond);          \
      return 1;                                                   \
    }                                                             \
  } while (0)

int main(void) {
  uint16_t pan_px[32 * 32], ms_px[4 * 8 * 8];
  for (int i = 0; i < 32 * 32; i++) pan_px[i] = (uint16_t)(300 + (i * 37) % 900);
  for (int i = 0; i < 4 * 8 * 8; i++) ms_px[i] = (uint16_t)(250 + (i * 53) % 800);

  UcganRaster *pan = NULL, *ms = NULL, *fused = NULL;
  CHECK(ucgan_raster_new(32, 32, 1, 11, pan_px, 32 * 32, &pan) == UCGAN_STATUS_OK);
  CHECK(ucgan_raster_new(8, 8, 4, 11, ms_px, 4 * 8 * 8, &ms) == UCGAN_STATUS_OK);

  size_t guarded = 0;
  CHECK(ucgan_baseline(UCGAN_BASELINE_HPF, pan, ms, &fused, &guarded) == UCGAN_STATUS_OK);
  size_t w = 0, h = 0, b = 0, len = 0;
  CHECK(ucgan_raster_dims(fused, &w, &h, &b, NULL) == UCGAN_STATUS_OK);
  CHECK(w == 32 && h == 32 && b == 4);
  CHECK(ucgan_raster_pixels(fused, &len) != NULL && len == 4 * 32 * 32);

  UcganQnr q;
  CHECK(ucgan_qnr(fused, ms, pan, &q) == UCGAN_STATUS_OK);
  CHECK(q.qnr > 0.0 && q.qnr <= 1.0);

  UcganRaster *bad = NULL;
  CHECK(ucgan_raster_new(8, 8, 4, 11, NULL, 0, &bad) == UCGAN_STATUS_NULL_POINTER);
  CHECK(ucgan_last_error() != NULL && strstr(ucgan_last_error(), "pixels") != NULL);

  printf("ucgan %s qnr %.4f\n", ucgan_version(), q.qnr);
  ucgan_raster_free(fused);
  ucgan_raster_free(ms);
  ucgan_raster_free(pan);
  return 0;
}
