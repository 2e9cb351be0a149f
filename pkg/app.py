"""
Multiple-testing laboratory - JSON API
Read-only access to stored runs and to the limit-law calculators
"""

from flask import Flask, jsonify

import config
from database import init_db
from routes.limits import limits_bp
from routes.runs import runs_bp


def create_app(db_path=None):
    app = Flask(__name__)
    app.config['DATABASE'] = db_path or config.DATABASE

    # Register blueprints
    app.register_blueprint(runs_bp)
    app.register_blueprint(limits_bp)

    @app.route('/')
    def index():
        """Endpoint overview"""
        return jsonify({
            'runs': '/runs/',
            'limits': ['/limits/poisson-tail', '/limits/fdr-limit', '/limits/cluster-pmf',
                       '/limits/compound-tail', '/limits/compound-fdr', '/limits/rate'],
        })

    return app


app = create_app()

if __name__ == '__main__':
    init_db(app.config['DATABASE'])
    app.run(debug=False, host='127.0.0.1', port=8080)
