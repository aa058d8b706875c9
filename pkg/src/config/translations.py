"""
Переводы и локализация
"""

# Переводы (только русский)
TRANSLATIONS = {
    "description": "bayescore: байесовский вывод, подгонка GLM, сравнение моделей и задачи решения",
    "version_pre": "Версия bayescore: ",
    # fit
    "help_fit": "Подгонка модели к набору данных",
    "fit_start": "🔧 Подгонка модели {family}/{link}: {n_obs} наблюдений, {dimension} параметров",
    "fit_done": "✅ Подгонка завершена, результаты в {out_dir}",
    "fit_warnings": "⚠️ Предупреждения диагностики: {count} параметров (см. {file})",
    "fit_divergences": "⚠️ Расходящихся переходов: {count}",
    # predict
    "help_predict": "Апостериорное предсказание для новых случаев",
    "predict_done": "✅ Предсказательные выборки ({draws} x {cases}) записаны в {out_path}",
    "predict_row": "  случай {case}: среднее {mean:.4g}, 95% интервал [{lower:.4g}, {upper:.4g}]",
    # compare
    "help_compare": "Сравнение подгонок по WAIC и DIC",
    "compare_header": "Модель | WAIC | SE | ΔWAIC | вес | DIC",
    "compare_row": "{model} | {waic:.2f} | {se:.2f} | {delta_waic:.2f} | {weight:.3f} | {dic}",
    "compare_hash_mismatch": "❌ Подгонки выполнены на разных данных отклика: {fits}",
    "compare_too_few": "❌ Для сравнения нужны хотя бы две подгонки",
    # decide
    "help_decide": "Ранжирование действий по ожидаемой полезности",
    "decide_best": "🏆 Лучшее действие: {act} (EU = {eu:.6g})",
    "decide_row": "  {rank}. {act}: {eu:.6g}",
    "decide_updated": "Априорное над состояниями обновлено: {prior}",
    "decide_axiom": "  {axiom}: {status}",
    # dist
    "help_dist": "Плотность, функция распределения, квантиль и моменты распределения",
    "dist_need_query": "❌ Укажите --density, --cdf, --quantile, --moments или --sample",
    # общее
    "err_user": "❌ Ошибка входных данных: {error}",
    "err_field": "❌ Ошибка в поле '{field}': {error}",
    "err_runtime": "❌ Ошибка выполнения: {error}",
    "err_unexpected": "❌ Непредвиденная ошибка: {error}",
    "passed": "✅ выполнена",
    "failed": "❌ нарушена",
}
