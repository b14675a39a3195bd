import hashlib
import json
import logging
import os
import tempfile

logger = logging.getLogger('nhces')

FLOAT_FORMAT = '%.17g'


def _atomic_write(path, write):
    """Escribe en un temporal del mismo directorio y lo renombra sobre ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.tmp_', dir=directory)
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            write(f)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.debug(f"Archivo escrito: {path}")
    return path


def write_csv(df, path):
    """
    Guarda un DataFrame como CSV con 17 cifras significativas.

    Args:
        df (pandas.DataFrame): Tabla.
        path (str): Ruta de destino.

    Returns:
        str: Ruta escrita.
    """
    return _atomic_write(path, lambda f: df.to_csv(f, index=False, float_format=FLOAT_FORMAT,
                                                   lineterminator='\n'))


def write_json(data, path):
    """Guarda ``data`` como JSON con claves ordenadas."""
    return _atomic_write(path, lambda f: f.write(json.dumps(data, sort_keys=True, indent=2) + '\n'))


def write_text(text, path):
    return _atomic_write(path, lambda f: f.write(text))


def file_sha256(path):
    """Huella SHA-256 del contenido de un archivo."""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()
