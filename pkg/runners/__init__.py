# Campaign runners package initialization
