/* Compiled with -fsyntax-only to check that the generated header is valid C. */
#include <stdio.h>
#include "farecast.h"

int main(void) {
    FcSeries *s = NULL;
    FcModel *m = NULL;
    FcHmmBank *b = NULL;
    FcDecision d;
    double x = 0.0, row[13] = {0};
    size_t k = 0;
    FcStatus st = fc_series_new("R1", "2016-02-01", &s);
    st = fc_series_push(s, "2016-01-30", 49.99);
    st = fc_random_purchase_price(s, &x);
    st = fc_optimal_price(s, &x);
    st = fc_normalized_performance(50.0, 40.0, 45.0, &x);
    st = fc_model_load("model.json", &m);
    st = fc_model_predict(m, row, 1, fc_model_n_features(m), &x);
    st = fc_model_decide(m, s, &d);
    st = fc_hmm_bank_load("bank", &b);
    st = fc_hmm_loglik(b, 0, row, 13, &x);
    st = fc_hmm_classify(b, row, 13, &k);
    if (st != FC_STATUS_OK) {
        printf("%s\n", fc_last_error());
    }
    printf("%s %zu %zu %d\n", fc_version(), fc_series_len(s), fc_hmm_bank_len(b), (int)d.forced);
    fc_hmm_bank_free(b);
    fc_model_free(m);
    fc_series_free(s);
    return 0;
}
