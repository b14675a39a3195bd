import logging
import os
from datetime import datetime

import colorama

# Inicializar colorama para colores en terminal
colorama.init()

LOG_FORMAT = '[%(asctime)s] %(levelname)s - %(message)s'


class ColoredFormatter(logging.Formatter):
    """Formateador que colorea WARNING en amarillo y ERROR/CRITICAL en rojo."""

    def format(self, record):
        log_message = super().format(record)

        if record.levelno >= logging.ERROR:
            return f"{colorama.Fore.RED}{log_message}{colorama.Style.RESET_ALL}"
        elif record.levelno >= logging.WARNING:
            return f"{colorama.Fore.YELLOW}{log_message}{colorama.Style.RESET_ALL}"
        return log_message


def setup_logging(log_dir="logs", verbose=False, name='nhces'):
    """
    Configura el logging global de la aplicación.

    Instala un handler de consola (con colores) y otro de archivo fechado en
    ``log_dir`` (sin colores, nivel DEBUG). Los handlers previos del root logger
    se eliminan para que ejecuciones repetidas no dupliquen mensajes.

    Args:
        log_dir (str): Directorio de logs. ``None`` desactiva el archivo.
        verbose (bool): Si es True la consola muestra también DEBUG.
        name (str): Nombre del logger que se devuelve.

    Returns:
        logging.Logger: Logger de la aplicación.
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)

    # Limpiar handlers existentes
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, f"{name}_{datetime.now().strftime('%Y%m%d')}.log")
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root_logger.addHandler(file_handler)

    # La consola escribe en stderr: los CSV y tablas van a stdout o a archivos
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(ColoredFormatter(LOG_FORMAT))
    root_logger.addHandler(console_handler)

    return logging.getLogger(name)
