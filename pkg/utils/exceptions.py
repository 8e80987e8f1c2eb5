"""
Иерархия исключений layerlab.

Все ошибки предметной области наследуются от LayerLabError, который сам
является ValueError: вызывающий код, ловящий ValueError, продолжает работать,
а CLI отличает ошибки предметной области от прочих сбоев.
"""

from config import ERROR_MESSAGES


class LayerLabError(ValueError):
    """Базовая ошибка предметной области."""

    message_key = ''

    def __init__(self, message: str = '', **details):
        if not message and self.message_key:
            template = ERROR_MESSAGES.get(self.message_key, self.message_key)
            try:
                message = template.format(**details)
            except (KeyError, IndexError):
                message = template
        super().__init__(message)
        self.details = details


class NonRealPrincipalPart(LayerLabError):
    """Коэффициент при старшей производной имеет мнимую часть."""
    message_key = 'non_real_principal_part'


class BadMultiIndex(LayerLabError):
    """Мультииндекс неверной длины или порядка выше второго."""
    message_key = 'bad_multi_index'


class NotElliptic(LayerLabError):
    """Матрица a² не является положительно определённой."""
    message_key = 'not_elliptic'


class EvalAtOrigin(LayerLabError):
    """Вычисление фундаментального решения в начале координат."""
    message_key = 'eval_at_origin'


class UnsupportedFamily(LayerLabError):
    """Семейство операторов без замкнутой формулы."""
    message_key = 'unsupported_family'


class UnsupportedDimension(LayerLabError):
    """Размерность вне {2, 3}."""
    message_key = 'unsupported_dimension'


class BadShapeParams(LayerLabError):
    """Некорректные параметры формы или числа узлов."""
    message_key = 'bad_shape_params'


class NeedsAmbientForm(LayerLabError):
    """Операция требует объемлющей формы плотности."""
    message_key = 'needs_ambient_form'


class DegenerateNodeSet(LayerLabError):
    """Все узлы совпадают."""
    message_key = 'degenerate_node_set'


class NonFiniteIntegrand(LayerLabError):
    """Подынтегральная функция не конечна в узлах."""
    message_key = 'non_finite_integrand'


class MissingSplit(LayerLabError):
    """Ядро передано без логарифмического разложения."""
    message_key = 'missing_split'


class MissingSingularityDeclaration(LayerLabError):
    """Для правила Даффи не объявлена особенность ядра."""
    message_key = 'missing_singularity'


class NonFiniteKernelValue(LayerLabError):
    """Ядро вернуло бесконечное значение вне диагонали."""
    message_key = 'non_finite_kernel'


class RoughDensityUnsupported(LayerLabError):
    """Грубые плотности поддерживаются только на кривых."""
    message_key = 'rough_density_unsupported'


class ConfigError(LayerLabError):
    """Некорректная конфигурация эксперимента."""
    message_key = 'config_error'
