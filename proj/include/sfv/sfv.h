/* sfv: shared-feature visualization for model neurons.
 *
 * C interface to the sfv core. All functions returning sfv_status set a
 * thread-local error message retrievable with sfv_last_error() on failure.
 * Objects are opaque handles created and destroyed through this API.
 */
#ifndef SFV_H
#define SFV_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sfv_status {
    SFV_OK = 0,
    SFV_ERR_INVALID_ARGUMENT = 1,
    SFV_ERR_IO = 2,
    SFV_ERR_FORMAT = 3,
    SFV_ERR_SHAPE = 4,
    SFV_ERR_DOMAIN = 5,
    SFV_ERR_NUMERIC = 6,
    SFV_ERR_PIPELINE = 7,
    SFV_ERR_UNKNOWN = 8
} sfv_status;

const char* sfv_version(void);
const char* sfv_status_name(sfv_status status);

/* Message for the most recent failure on the calling thread. */
const char* sfv_last_error(void);

typedef struct sfv_backbone sfv_backbone;
typedef struct sfv_readout sfv_readout;
typedef struct sfv_image sfv_image;
typedef struct sfv_config sfv_config;
typedef struct sfv_saliency_pair sfv_saliency_pair;

/* ---- feature extractor ------------------------------------------------ */

sfv_status sfv_backbone_load(const char* path, sfv_backbone** out);
sfv_status sfv_backbone_save(const sfv_backbone* backbone, const char* path);
/* Default convolutional architecture with random weights. */
sfv_status sfv_backbone_random(size_t feature_dim, size_t input_size, uint64_t seed,
                               sfv_backbone** out);
size_t sfv_backbone_feature_dim(const sfv_backbone* backbone);
size_t sfv_backbone_input_size(const sfv_backbone* backbone);
void sfv_backbone_free(sfv_backbone* backbone);

/* ---- images ------------------------------------------------------------ */

/* Loads a binary 8-bit P6 pixmap and resizes it to target_size x target_size
 * (0 keeps the stored size). */
sfv_status sfv_image_load(const char* path, size_t target_size, sfv_image** out);
size_t sfv_image_width(const sfv_image* image);
size_t sfv_image_height(const sfv_image* image);
void sfv_image_free(sfv_image* image);

/* ---- features and the model neuron ------------------------------------- */

/* out_features must hold sfv_backbone_feature_dim(backbone) doubles.
 * Extraction uses the backbone's stored readout location. */
sfv_status sfv_extract_features(const sfv_backbone* backbone, const sfv_image* image,
                                double* out_features);

sfv_status sfv_readout_load(const char* path, const sfv_backbone* backbone,
                            sfv_readout** out);
sfv_status sfv_readout_save(const sfv_readout* readout, const char* path);
sfv_status sfv_readout_create(const sfv_backbone* backbone, const double* weights,
                              size_t n, double u, double v, sfv_readout** out);
size_t sfv_readout_dim(const sfv_readout* readout);
sfv_status sfv_readout_weights(const sfv_readout* readout, double* out, size_t n);
sfv_status sfv_predict(const sfv_readout* readout, const double* features, size_t n,
                       double* out);
void sfv_readout_free(sfv_readout* readout);

/* ---- similarity and synthetic neurons over raw arrays ------------------ */

sfv_status sfv_neuron_similarity(const double* a1, const double* a2, const double* w,
                                 size_t n, double* out);
sfv_status sfv_beta_weights(const double* a_in, const double* a_out, const double* w,
                            size_t n, double* out_beta);

/* Activation matrices are row-major rows x c. out_w holds c doubles. */
sfv_status sfv_build_synthetic_neuron(const double* a_in, size_t rows_in,
                                      const double* a_out, size_t rows_out, size_t c,
                                      double* out_w, double* out_top_eigenvalue,
                                      int* out_degenerate);

sfv_status sfv_mann_whitney_u(const double* sample_a, size_t n_a, const double* sample_b,
                              size_t n_b, double* out_u, double* out_p_two_sided);

/* ---- paired saliency maps ----------------------------------------------- */

typedef struct sfv_attribution_options {
    int use_integrated_gradients; /* 0: plain gradient backbone */
    size_t ig_steps;
    double smoothing_sigma;
    double norm_floor;
} sfv_attribution_options;

void sfv_attribution_options_init(sfv_attribution_options* options);

/* which: 0 selects the driver map, 1 the reference map. */
sfv_status sfv_parallel_saliency(const sfv_readout* readout, const sfv_image* driver,
                                 const sfv_image* reference,
                                 const sfv_attribution_options* options,
                                 sfv_saliency_pair** out);
double sfv_saliency_similarity(const sfv_saliency_pair* pair);
size_t sfv_saliency_map_size(const sfv_saliency_pair* pair); /* h * w */
sfv_status sfv_saliency_norm(const sfv_saliency_pair* pair, int which, double* out);
sfv_status sfv_saliency_values(const sfv_saliency_pair* pair, int which, double* out,
                               size_t len);
sfv_status sfv_saliency_beta(const sfv_saliency_pair* pair, double* out, size_t len);
sfv_status sfv_saliency_bound_check(const sfv_saliency_pair* pair, int which,
                                    int* out_pass);
/* Writes the warm-colormap overlay of the selected map over the image. */
sfv_status sfv_saliency_render(const sfv_saliency_pair* pair, int which,
                               const sfv_image* image, const char* path);
void sfv_saliency_pair_free(sfv_saliency_pair* pair);

/* ---- configuration and pipeline commands ------------------------------- */

sfv_status sfv_config_load(const char* path, sfv_config** out);
/* Overrides both the run seed and the training seed. */
sfv_status sfv_config_set_seed(sfv_config* config, uint64_t seed);
sfv_status sfv_config_set_out_dir(sfv_config* config, const char* out_dir);
void sfv_config_free(sfv_config* config);

/* Commands write their artifacts into the config's output directory. When
 * summary is non-null the key=value report text is copied into it (truncated
 * to summary_len - 1 characters, always NUL-terminated). */
sfv_status sfv_cmd_fit(const sfv_config* config, char* summary, size_t summary_len);
sfv_status sfv_cmd_eval(const sfv_config* config, const char* readout_path, char* summary,
                        size_t summary_len);
sfv_status sfv_cmd_select_reference(const sfv_config* config, const char* readout_path,
                                    const char* query, char* summary, size_t summary_len);
sfv_status sfv_cmd_visualize(const sfv_config* config, const char* readout_path,
                             const char* outside_id, const char* within_id, char* summary,
                             size_t summary_len);
sfv_status sfv_cmd_synth_neuron(const sfv_config* config, const char* within_manifest,
                                const char* outside_manifest, double noise_std,
                                const char* emit_responses_path, char* summary,
                                size_t summary_len);

/* Finite-difference validation of all gradient paths; fails when any check
 * exceeds the tolerance. */
sfv_status sfv_cmd_gradcheck(size_t seeds, uint64_t base_seed, char* summary,
                             size_t summary_len);

#ifdef __cplusplus
}
#endif

#endif /* SFV_H */
